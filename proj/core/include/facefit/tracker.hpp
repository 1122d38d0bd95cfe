#pragma once

#include <vector>

#include "facefit/fitter.hpp"

namespace facefit {

/// Video-tracking configuration on top of the per-frame fit. Batched
/// refinement runs `batch_rounds` x `batch_steps` Adam steps over random
/// B = min(T, 16) frame samples.
struct TrackConfig {
    FitConfig fit;
    int sequential_steps = 250; // per-frame steps in the sequential pass
    int batch_rounds = 5;
    int batch_steps = 100;
    double smooth_expression = 1.0;
    double smooth_jaw = 10.0;
    double smooth_rotation = 10.0;
    double smooth_translation = 100.0;

    void validate() const;
};

struct SmoothnessResult {
    double value = 0.0;
    std::vector<Eigen::VectorXd> grads; // aligned with the input sequence
};

/// Temporal smoothness over a sequence of per-frame vectors:
///   weight/(2B) * sum_t ( ||x[t-1]-x[t]||^2 + ||x[t]-x[t+1]||^2 )
/// summed over frames in `batch` (all frames when null); boundary frames use
/// their single neighbor. Gradients cover every frame that appears in a
/// difference, including neighbors outside the batch.
SmoothnessResult smoothness_loss(const std::vector<Eigen::VectorXd>& sequence, double weight,
                                 const std::vector<int>* batch = nullptr);

struct TrackResult {
    std::vector<FitResult> frames;
    std::vector<std::uint8_t> flagged; // frame inherited its predecessor's parameters
    // Full-sequence objective (sum of frame energies + smoothness) sampled
    // every 50 batched-refinement steps, plus the final value.
    std::vector<double> refinement_objective;
};

/// Three-stage monocular tracking: full fit on frame 1; sequential
/// propagation with identity and intrinsics frozen; batched joint refinement
/// with shared identity/intrinsics and temporal smoothness. Deterministic
/// under a fixed config seed.
TrackResult track_sequence(const MorphableModel& model, const std::vector<FitInputs>& frames,
                           const TrackConfig& config);

/// Objective monitored by the batched stage: sum of all per-frame energies
/// plus every smoothness term, evaluated on the full sequence.
double track_objective(const MorphableModel& model, const std::vector<FitInputs>& frames,
                       const TrackConfig& config, const std::vector<FitResult>& state);

} // namespace facefit
