#include "mbtsad/unicode.hpp"

#include <algorithm>
#include <array>

namespace mbtsad::uni {

namespace {

struct Composition {
    uint32_t base;
    uint32_t mark;
    uint32_t composed;
};

// Generated from the Unicode canonical decomposition data for the Latin
// blocks: every single-step (base, combining mark) pair whose composed form
// lies below U+0250.
constexpr Composition kCompositions[] = {
#include "nfc_table.inc"
};

constexpr size_t kNumCompositions = sizeof(kCompositions) / sizeof(kCompositions[0]);

uint32_t compose_pair(uint32_t base, uint32_t mark) {
    for (size_t i = 0; i < kNumCompositions; ++i) {
        if (kCompositions[i].base == base && kCompositions[i].mark == mark)
            return kCompositions[i].composed;
    }
    return 0;
}

bool is_combining(uint32_t cp) { return cp >= 0x0300 && cp <= 0x036F; }

}  // namespace

std::vector<uint32_t> decode_utf8(const std::string& s) {
    std::vector<uint32_t> out;
    out.reserve(s.size());
    size_t i = 0;
    const auto* b = reinterpret_cast<const unsigned char*>(s.data());
    const size_t n = s.size();
    while (i < n) {
        uint32_t cp = 0xFFFD;
        unsigned char c = b[i];
        if (c < 0x80) {
            cp = c;
            i += 1;
        } else if ((c >> 5) == 0x6 && i + 1 < n && (b[i + 1] & 0xC0) == 0x80) {
            cp = (static_cast<uint32_t>(c & 0x1F) << 6) | (b[i + 1] & 0x3F);
            if (cp < 0x80) cp = 0xFFFD;
            i += 2;
        } else if ((c >> 4) == 0xE && i + 2 < n && (b[i + 1] & 0xC0) == 0x80 &&
                   (b[i + 2] & 0xC0) == 0x80) {
            cp = (static_cast<uint32_t>(c & 0x0F) << 12) |
                 (static_cast<uint32_t>(b[i + 1] & 0x3F) << 6) | (b[i + 2] & 0x3F);
            if (cp < 0x800 || (cp >= 0xD800 && cp <= 0xDFFF)) cp = 0xFFFD;
            i += 3;
        } else if ((c >> 3) == 0x1E && i + 3 < n && (b[i + 1] & 0xC0) == 0x80 &&
                   (b[i + 2] & 0xC0) == 0x80 && (b[i + 3] & 0xC0) == 0x80) {
            cp = (static_cast<uint32_t>(c & 0x07) << 18) |
                 (static_cast<uint32_t>(b[i + 1] & 0x3F) << 12) |
                 (static_cast<uint32_t>(b[i + 2] & 0x3F) << 6) | (b[i + 3] & 0x3F);
            if (cp < 0x10000 || cp > 0x10FFFF) cp = 0xFFFD;
            i += 4;
        } else {
            i += 1;
        }
        out.push_back(cp);
    }
    return out;
}

std::string encode_utf8(const std::vector<uint32_t>& cps) {
    std::string out;
    out.reserve(cps.size());
    for (uint32_t cp : cps) {
        if (cp < 0x80) {
            out.push_back(static_cast<char>(cp));
        } else if (cp < 0x800) {
            out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        } else if (cp < 0x10000) {
            out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        } else {
            out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        }
    }
    return out;
}

std::string nfc(const std::string& s) {
    std::vector<uint32_t> cps = decode_utf8(s);
    std::vector<uint32_t> out;
    out.reserve(cps.size());
    for (uint32_t cp : cps) {
        if (!out.empty() && is_combining(cp)) {
            if (uint32_t comp = compose_pair(out.back(), cp)) {
                out.back() = comp;
                continue;
            }
        }
        out.push_back(cp);
    }
    return encode_utf8(out);
}

size_t length(const std::string& s) { return decode_utf8(s).size(); }

}  // namespace mbtsad::uni
