// Copyright 2026 The msd-ctr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace msd::io {

/// Lowercases ASCII, splits on whitespace, and emits every ASCII punctuation
/// character as its own token, except '-' and '_' which stay inside words
/// ("low-sugar" is one token). The markers <pad>, <bos>, <eos> and <sep> are
/// kept whole. Bytes >= 0x80 are treated as word characters.
std::vector<std::string> tokenize(std::string_view text);

}  // namespace msd::io
