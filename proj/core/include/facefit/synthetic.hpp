#pragma once

#include <cstdint>
#include <random>

#include "facefit/camera.hpp"
#include "facefit/fitter.hpp"
#include "facefit/model.hpp"

namespace facefit {

/// Unit icosphere: 12 -> 42 -> 162 -> 642 vertices as `subdivisions` grows.
/// Triangles wind counter-clockwise seen from outside.
TriMesh icosphere(int subdivisions);

/// Deterministic synthetic head asset: an icosphere template (radius 0.1 m)
/// with smooth low-frequency blendshape fields, a chin jaw joint with smooth
/// skinning weights, and an equal-area front-axis uv parameterization that is
/// injective away from the (never visible) back pole. All stored values are
/// float32-representable so P3DM round-trips are exact.
MorphableModel sphere_head_model(int subdivisions = 3, int id_dim = 8, int ex_dim = 4,
                                 std::uint32_t seed = 20240101);

/// Random-but-plausible parameters for recovery experiments.
FaceParams sample_face_params(const MorphableModel& model, std::mt19937_64& rng);

/// Random camera around the canonical frontal view of `model` for a
/// width x height image: rotation <= ~0.25 rad, moderate lateral/depth
/// offset, focal length within ~±16% of max(width, height), principal point
/// within ±3% of the image center.
CameraParams sample_camera(const MorphableModel& model, int width, int height,
                           std::mt19937_64& rng);

/// Renders uv/normal/mask maps from (face, cam) as synthetic fit inputs.
FitInputs render_fit_inputs(const MorphableModel& model, const FaceParams& face,
                            const CameraParams& cam, int width, int height, int threads = 0);

} // namespace facefit
