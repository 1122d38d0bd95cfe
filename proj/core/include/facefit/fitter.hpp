#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "facefit/camera.hpp"
#include "facefit/correspond.hpp"
#include "facefit/image.hpp"
#include "facefit/model.hpp"

namespace facefit {

/// Weights, learning rates and optimizer constants for single-image fitting.
/// Defaults follow the reference configuration: lambda_uv 2000, lambda_n 200,
/// lambda_id 0.15, lambda_ex 0.01, Adam with lr_id 0.001 / lr_ex 0.003,
/// 500 steps.
struct FitConfig {
    double lambda_uv = 2000.0;
    double lambda_n = 200.0;
    double lambda_id = 0.15;
    double lambda_ex = 0.01;
    double lambda_lmk = 0.0; // sparse-landmark term, off unless enabled

    double lr_id = 0.001;
    double lr_ex = 0.003;
    double lr_jaw = 0.003;
    double lr_cam = 0.001;

    int steps = 500;
    double delta_uv = 0.0027;

    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;

    int corr_refresh_interval = 10; // steps between correspondence rebuilds
    std::uint64_t seed = 0;
    int threads = 0; // 0 = auto

    void validate() const;
};

struct Landmark2d {
    int vertex_id = 0;
    Eigen::Vector2d pixel = Eigen::Vector2d::Zero();
};

/// Per-image observation set. uv_map is 2-channel, normal_map 3-channel,
/// mask 1-channel; all share dimensions.
struct FitInputs {
    MapImage uv_map;
    MapImage normal_map;
    MapImage mask;
    std::optional<Eigen::VectorXd> mica_identity; // z_id anchor; zero vector when absent
    std::vector<Landmark2d> landmarks2d;

    void validate(const MorphableModel& model) const;
};

struct TermBreakdown {
    double uv = 0.0;       // lambda_uv * L_uv
    double normal = 0.0;   // lambda_n * L_n
    double reg = 0.0;
    double landmark = 0.0;
    double total = 0.0;
    int contributing_vertices = 0;
    int contributing_pixels = 0;
};

struct FitResult {
    FaceParams face;
    CameraParams cam;
    std::vector<double> energy_trace; // one entry per step
    TermBreakdown term_breakdown;     // at the final parameters
};

// ---- individual loss terms -------------------------------------------------

struct UvLossResult {
    double value = 0.0;
    Eigen::MatrixX2d grad; // w.r.t. projected pixels, N x 2
    int contributing = 0;
};

/// Mean L1 pixel distance |target - projected| over vertices that are both
/// accepted and visible; zero with zero gradient when nothing contributes.
UvLossResult uv_vertex_loss(const CorrespondenceSet& corr, const Eigen::MatrixX2d& projected,
                            const std::vector<std::uint8_t>& visible);

struct NormalLossResult {
    double value = 0.0;
    struct PixelGrad {
        int x, y;
        Eigen::Vector3d grad; // w.r.t. the rendered pixel
    };
    std::vector<PixelGrad> pixel_grads;
    int contributing = 0;
};

/// Mean absolute per-channel difference over pixels valid in pred, rendered
/// and mask simultaneously.
NormalLossResult normal_loss(const MapImage& pred, const MapImage& rendered, const MapImage& mask);

struct RegResult {
    double value = 0.0;
    Eigen::VectorXd grad_identity;
    Eigen::VectorXd grad_expression;
};

/// lambda_id ||z_id - anchor||^2 + lambda_ex ||z_ex||^2; the anchor defaults
/// to zero when no identity prediction is supplied.
RegResult regularization(const FaceParams& face, const std::optional<Eigen::VectorXd>& mica_identity,
                         double lambda_id, double lambda_ex);

struct LandmarkLossResult {
    double value = 0.0;
    Eigen::MatrixX2d grad; // w.r.t. projected pixels, N x 2
};

/// Mean L1 pixel distance over the provided (vertex, pixel) pairs.
LandmarkLossResult landmark_loss(const std::vector<Landmark2d>& landmarks,
                                 const Eigen::MatrixX2d& projected);

// ---- optimizer --------------------------------------------------------------

struct AdamState {
    Eigen::VectorXd first_moment;
    Eigen::VectorXd second_moment;
    std::int64_t step = 0;

    static AdamState zero(Eigen::Index dim);
};

/// One bias-corrected Adam update with per-coordinate learning rates. When
/// `active` is non-null, only flagged coordinates update (parameters and
/// moments of inactive coordinates are untouched).
void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grad,
               const Eigen::VectorXd& learning_rates, AdamState& state, const FitConfig& config,
               const std::vector<std::uint8_t>* active = nullptr);

// ---- energy -----------------------------------------------------------------

struct EnergyGradients {
    TermBreakdown terms;
    Eigen::VectorXd face_grad;       // d E / d (identity | expression | jaw)
    Eigen::VectorXd cam_grad;        // d E / d (rotation | translation | fl | pp), 9 entries
    Eigen::VectorXd cam_grad_sparse; // camera gradient from the uv + landmark terms only
};

/// Full energy E = lambda_uv L_uv + lambda_n L_n + R (+ lambda_lmk L_lmk)
/// with analytic gradients for every unknown. Pixel-to-triangle assignment,
/// pixel validity overlap and correspondence targets are constants within one
/// evaluation.
EnergyGradients energy_and_gradients(const MorphableModel& model, const FaceParams& face,
                                     const CameraParams& cam, const FitInputs& inputs,
                                     const FitConfig& config, const CorrespondenceSet& corr);

// ---- full fit ---------------------------------------------------------------

/// Which parameter blocks the optimizer may move.
struct ParamFreeze {
    bool identity = false;
    bool intrinsics = false; // focal length + principal point
};

struct FitInit {
    FaceParams face;
    CameraParams cam;
};

/// Heuristic initialization: zero face parameters, identity rotation, focal
/// length max(width, height), principal point at the image center, and the
/// template centered at a depth where it fills ~60% of the image.
FitInit default_fit_init(const MorphableModel& model, int width, int height);

/// Two-phase single-image fit: the first 20% of steps update the camera only
/// (driven by the uv and landmark terms), the remainder update everything.
/// Throws NoCorrespondences when phase 1 never sees >= 10 contributing
/// vertices.
FitResult fit_image(const MorphableModel& model, const FitInputs& inputs, const FitConfig& config);

/// Fit from an explicit starting point, optionally freezing parameter blocks
/// and skipping the camera-only phase (used by the video tracker).
FitResult fit_image_from(const MorphableModel& model, const FitInputs& inputs,
                         const FitConfig& config, const FitInit& init, const ParamFreeze& freeze,
                         bool run_camera_phase);

} // namespace facefit
