#pragma once

#include <cstdio>
#include <string>

namespace sparseprior {

// Shortest deterministic float formatting used for all text outputs; %.17g
// round-trips IEEE doubles exactly.
inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string fmt_fixed(double v, int digits) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

}  // namespace sparseprior
