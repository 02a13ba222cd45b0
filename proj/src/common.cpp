#include "mbtsad/common.hpp"

#include <cstdio>

namespace mbtsad {

std::string hex64(uint64_t x) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(x));
    return std::string(buf);
}

}  // namespace mbtsad
