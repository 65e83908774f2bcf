// Copyright 2026 The msd-ctr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace msd::io {

/// Little-endian encoders for checkpoint and embedding files. Doubles are
/// stored as float32 unless written with put_f64.
void put_u32(std::string& out, std::uint32_t v);
void put_u64(std::string& out, std::uint64_t v);
void put_f64(std::string& out, double v);
void put_f32s(std::string& out, std::span<const double> v);

/// Cursor over a byte buffer; every read past the end throws ParseError
/// with the offending offset.
class BinaryReader {
public:
    explicit BinaryReader(std::string_view data, std::size_t pos = 0) : data_(data), pos_(pos) {}

    std::uint32_t u32();
    std::uint64_t u64();
    double f64();
    void f32s(std::span<double> out);
    /// Checks that `tag` follows; ParseError otherwise.
    void expect(std::string_view tag, std::string_view what);

    std::size_t pos() const noexcept { return pos_; }
    std::size_t remaining() const noexcept { return data_.size() - pos_; }

private:
    std::string_view data_;
    std::size_t pos_;
};

}  // namespace msd::io
