// Copyright 2026 The msd-ctr Authors
// SPDX-License-Identifier: Apache-2.0

#include "msd/io/binary.hpp"

#include <bit>

#include "msd/error.hpp"

namespace msd::io {

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out += static_cast<char>((v >> (8 * i)) & 0xFF);
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out += static_cast<char>((v >> (8 * i)) & 0xFF);
}

void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

void put_f32s(std::string& out, std::span<const double> v) {
    for (double d : v) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(d)));
}

std::uint32_t BinaryReader::u32() {
    if (remaining() < 4) throw ParseError(pos_, "unexpected end of binary data");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
}

std::uint64_t BinaryReader::u64() {
    const std::uint64_t lo = u32();
    const std::uint64_t hi = u32();
    return lo | (hi << 32);
}

double BinaryReader::f64() { return std::bit_cast<double>(u64()); }

void BinaryReader::f32s(std::span<double> out) {
    for (double& d : out) d = static_cast<double>(std::bit_cast<float>(u32()));
}

void BinaryReader::expect(std::string_view tag, std::string_view what) {
    if (data_.substr(pos_, tag.size()) != tag) throw ParseError(pos_, "not a " + std::string(what));
    pos_ += tag.size();
}

}  // namespace msd::io
