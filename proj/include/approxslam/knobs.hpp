#pragma once

#include "approxslam/errors.hpp"

#include <array>
#include <string>

namespace approxslam {

/// The approximation control surface of the fusion pipeline.
struct KnobSettings {
    int csr = 1;                        // input downsample factor, one of {1, 2, 4, 8}
    double icp_threshold = 1e-8;        // early-exit bound on the squared ICP twist norm
    std::array<int, 3> pd = {10, 5, 4};  // ICP iteration caps, finest level first
    int tr = 1;                         // track every tr-th frame
    int ir = 1;                         // integrate every ir-th frame

    static KnobSettings most_accurate() { return {}; }

    void validate() const {
        if (csr != 1 && csr != 2 && csr != 4 && csr != 8) throw InvalidInputError("csr must be 1, 2, 4 or 8");
        if (!(icp_threshold >= 0.0)) throw InvalidInputError("icp threshold must be non-negative");
        for (int p : pd) {
            if (p < 1) throw InvalidInputError("pyramid iteration caps must be >= 1");
        }
        if (tr < 1 || ir < 1) throw InvalidInputError("tracking and integration rates must be >= 1");
    }

    bool operator==(const KnobSettings&) const = default;
};

}  // namespace approxslam
