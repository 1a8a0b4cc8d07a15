#pragma once

#include <string>
#include <string_view>

#include "caplab/polytope.hpp"

namespace caplab {

// Scatter of the corner logits (crosses) and the center (dot) on the first
// two logit axes. `note` is printed under the plot when non-empty.
std::string corners_svg(const PolytopeEstimate& estimate, std::string_view note = {});

}  // namespace caplab
