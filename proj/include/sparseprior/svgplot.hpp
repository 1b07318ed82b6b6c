#pragma once

#include <string>
#include <vector>

namespace sparseprior::plot {

// Static labeled scatter: one circle per point, categorical palette, legend
// and axes. Purely textual output with fixed-precision coordinates, so the
// bytes are a function of the inputs alone.
std::string scatter_svg(const std::vector<double>& xy, long n,
                        const std::vector<int>& labels,
                        const std::vector<std::string>& label_names, int width = 720,
                        int height = 540);

void write_scatter_svg(const std::string& path, const std::vector<double>& xy, long n,
                       const std::vector<int>& labels,
                       const std::vector<std::string>& label_names);

}  // namespace sparseprior::plot
