#pragma once

#include <optional>
#include <string>

#include "gazespot/raster.hpp"

namespace gazespot {

// Ground-truth regions for one image: the object support and, for animate
// categories, the face sub-region. Masks here are exact (binary); analyses
// smooth them with build_roi first.
struct RoiSet {
  std::string image_id;
  Raster object_roi;
  std::optional<Raster> face_roi;
  bool face_present = false;
};

}  // namespace gazespot
