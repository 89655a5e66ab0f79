#pragma once

#include <Eigen/Core>

#include <string>

#include "mtpano/raster.hpp"
#include "mtpano/sphere.hpp"

namespace mtpano {

enum class SampleMode { Bilinear, Nearest };

/// Samples all channels of an ERP raster at a spherical coordinate. Columns wrap around
/// at theta = +-pi. Bilinear taps beyond the first or last row continue over the pole (same
/// row, half a turn away) for even widths and clamp otherwise. Bilinear normals are re-normalized.
/// Throws ContractError for bilinear sampling of semantic labels.
Eigen::VectorXd sample_erp(const ErpImage& image, const SphericalCoord<double>& coord,
                           SampleMode mode);

/// A perspective crop and the pose it was taken with.
struct PatchSample {
  CameraPose pose;
  Task task = Task::Rgb;
  Raster payload;
  Mask valid;
  std::string pano_id;
};

/// A perspective label re-projected onto the full ERP grid. payload is only meaningful
/// where valid is true; everything else is zero.
struct ErpPatchLabel {
  Raster payload;
  Mask valid;
  Task task = Task::Rgb;
  CameraPose pose;
};

/// Task-aware equirectangular-to-perspective extraction:
///   semantic  nearest-sampled labels
///   depth     radial distance times d_cam . k (z-depth)
///   normal    R^-1 times the sampled world-frame normal
///   rgb       bilinear resampling
PatchSample extract_patch(const ErpImage& pano, const CameraPose& pose, Task task,
                          std::string pano_id = {});

/// Inverse of extract_patch onto an erp_width x erp_height grid. A pixel is valid when its
/// ray lies in front of the camera, its patch-plane position is at least half a pixel inside
/// the border, and the patch taps it reads are valid.
ErpPatchLabel reproject_labels(const PatchSample& patch, int erp_width, int erp_height);

}  // namespace mtpano
