#pragma once

#include <array>

#include "oetr/errors.hpp"

namespace oetr::pipeline {

// Invertible record of the coordinate chain applied to one image:
// isotropic resize, pad placement, crop, crop resize. Maps original-image
// pixel coordinates to processed-image coordinates as
//   forward(p) = ((p * resize_ratio + pad) - crop_origin) * crop_ratio
// Kept in double precision; round trips are exact to well under 1e-6 px.
struct ImageTransform {
    double resize_ratio = 1.0;
    double pad_left = 0.0, pad_top = 0.0;
    double crop_x = 0.0, crop_y = 0.0;
    double crop_ratio = 1.0;

    void validate() const {
        if (!(resize_ratio > 0) || !(crop_ratio > 0))
            throw InvalidInput("image transform: ratios must be positive");
    }

    std::array<double, 2> forward(const std::array<double, 2>& p) const {
        return {((p[0] * resize_ratio + pad_left) - crop_x) * crop_ratio,
                ((p[1] * resize_ratio + pad_top) - crop_y) * crop_ratio};
    }

    std::array<double, 2> inverse(const std::array<double, 2>& q) const {
        return {((q[0] / crop_ratio + crop_x) - pad_left) / resize_ratio,
                ((q[1] / crop_ratio + crop_y) - pad_top) / resize_ratio};
    }
};

}  // namespace oetr::pipeline
