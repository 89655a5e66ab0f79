#pragma once

#include <cstdint>

#include "mtpano/raster.hpp"

namespace mtpano::synthetic {

// Smooth test panoramas defined as functions of the Camera-frame unit ray, so every field
// is continuous across the seam and at the poles.

double depth_at(const Vec3<double>& ray);
Vec3<double> normal_at(const Vec3<double>& ray);
/// Octant index 0..7 from the signs of the ray components.
int octant_at(const Vec3<double>& ray);

ErpImage depth_pano(int width, int height);
ErpImage normal_pano(int width, int height);
ErpImage semantic_pano(int width, int height);
/// Smooth color field plus a few hard-edged bands.
ErpImage rgb_pano(int width, int height, std::uint64_t seed);

}  // namespace mtpano::synthetic
