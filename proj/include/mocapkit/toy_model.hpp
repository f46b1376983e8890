#pragma once

#include <cstdint>
#include <string>

#include "mocapkit/model.hpp"

namespace mocapkit {

enum class SizeClass { Small, Medium };

SizeClass size_class_from_string(const std::string& s);
const char* to_string(SizeClass size);

// Procedural articulated model with the layout of a whole-body hand+body model:
// 22 body joints (pelvis root, wrists included) and 15 finger joints per hand,
// 10 shape coefficients, mirror-symmetric about the x = 0 plane (left is +x).
//
// Every joint carries a small octahedron of vertices rigidly bound to it whose
// centroid is the joint (its regressor row), bones carry blended vertices, and
// each finger ends in a fingertip vertex. Output depends only on the seed.
ParametricModel gen_toy_model(std::uint64_t seed, SizeClass size = SizeClass::Small);

}  // namespace mocapkit
