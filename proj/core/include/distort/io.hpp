#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "distort/density.hpp"
#include "distort/distortion.hpp"
#include "distort/dynamics.hpp"
#include "distort/tree.hpp"

namespace distort::io {

// %.17g
std::string format_double(double v);

// {"family": "wang", "alpha": 0.5}, separable as
// {"family": "separable", "weight": {"kind": "linear", "a": .., "b": .., "k": ..}, "base": {..}, "horizon": T}
std::string distortion_to_json(const DistortionSpec& d);
DistortionSpec distortion_from_json(std::string_view json);

// {"times": [..], "states": [[..], ..], "up_prob": [[..], ..]}
std::string tree_to_json(const TreeModel& tree);
TreeModel tree_from_json(std::string_view json);

void write_field_csv(const std::filesystem::path& path, const DensityField& field);

// Little-endian: "DSTF", u32 version, u32 nt, u32 nx, then f64 reliable_tail,
// t[nt], x[nx], rho[nt*nx], G[nt*nx], 1-G[nt*nx].
void write_field_binary(const std::filesystem::path& path, const DensityField& field);
DensityField read_field_binary(const std::filesystem::path& path);

void write_drift_csv(const std::filesystem::path& path, const DriftField& mu);
void write_pde_csv(const std::filesystem::path& path, const PDESolution& sol);
void write_phi_csv(const std::filesystem::path& path, const PhiCurve& curve);
std::string phi_metadata_json(const PhiCurve& curve, const DistortionSpec& d);

}  // namespace distort::io
