#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mbtsad::uni {

// Decode UTF-8 into code points. Invalid bytes decode as U+FFFD.
std::vector<uint32_t> decode_utf8(const std::string& s);

std::string encode_utf8(const std::vector<uint32_t>& cps);

// Canonical composition for Latin scripts: greedily composes (base,
// combining mark) pairs into their precomposed forms. Covers Latin-1
// Supplement and Latin Extended-A/B targets; other scripts pass through.
std::string nfc(const std::string& s);

// Number of code points (used for split positions inside tokens).
size_t length(const std::string& s);

}  // namespace mbtsad::uni
