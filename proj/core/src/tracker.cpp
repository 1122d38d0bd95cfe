#include "facefit/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "facefit/common.hpp"

namespace facefit {

void TrackConfig::validate() const {
    fit.validate();
    if (sequential_steps <= 0 || batch_rounds < 0 || batch_steps <= 0)
        fail(ErrorKind::NonFiniteData, "tracker step counts must be positive");
    if (smooth_expression < 0 || smooth_jaw < 0 || smooth_rotation < 0 || smooth_translation < 0)
        fail(ErrorKind::NonFiniteData, "smoothness weights must be non-negative");
}

SmoothnessResult smoothness_loss(const std::vector<Eigen::VectorXd>& sequence, double weight,
                                 const std::vector<int>* batch) {
    const int frame_count = int(sequence.size());
    SmoothnessResult out;
    out.grads.resize(frame_count);
    for (int t = 0; t < frame_count; ++t) out.grads[t] = Eigen::VectorXd::Zero(sequence[t].size());
    if (frame_count == 0) return out;

    std::vector<int> all;
    if (!batch) {
        all.resize(frame_count);
        std::iota(all.begin(), all.end(), 0);
        batch = &all;
    }
    if (batch->empty()) return out;

    const double scale = weight / (2.0 * double(batch->size()));
    double sum = 0.0;
    for (const int t : *batch) {
        if (t > 0) {
            const Eigen::VectorXd d = sequence[t - 1] - sequence[t];
            sum += d.squaredNorm();
            out.grads[t - 1] += 2.0 * scale * d;
            out.grads[t] -= 2.0 * scale * d;
        }
        if (t < frame_count - 1) {
            const Eigen::VectorXd d = sequence[t] - sequence[t + 1];
            sum += d.squaredNorm();
            out.grads[t] += 2.0 * scale * d;
            out.grads[t + 1] -= 2.0 * scale * d;
        }
    }
    out.value = scale * sum;
    return out;
}

namespace {

// Global stage-C layout: shared [identity | log-fl | pp-offset] then per
// frame [expression | jaw | rotation | translation].
struct TrackLayout {
    int kid = 0, kex = 0, frames = 0;
    int shared_size() const { return kid + 3; }
    int frame_size() const { return kex + 9; }
    int total() const { return shared_size() + frames * frame_size(); }
    int frame_off(int t) const { return shared_size() + t * frame_size(); }
    int ex_off(int t) const { return frame_off(t); }
    int jaw_off(int t) const { return frame_off(t) + kex; }
    int rot_off(int t) const { return frame_off(t) + kex + 3; }
    int trans_off(int t) const { return frame_off(t) + kex + 6; }
    int fl_off() const { return kid; }
    int pp_off() const { return kid + 1; }
};

struct TrackCoding {
    double fl_ref = 1.0;
    Eigen::Vector2d pp_ref = Eigen::Vector2d::Zero();
    double pp_scale = 1.0;
};

FaceParams frame_face(const TrackLayout& l, const Eigen::VectorXd& x, int t) {
    FaceParams f;
    f.identity_coeffs = x.segment(0, l.kid);
    f.expression_coeffs = x.segment(l.ex_off(t), l.kex);
    f.jaw_rotation = x.segment<3>(l.jaw_off(t));
    return f;
}

CameraParams frame_cam(const TrackLayout& l, const TrackCoding& coding, const Eigen::VectorXd& x,
                       int t) {
    CameraParams c;
    c.rotation = x.segment<3>(l.rot_off(t));
    c.translation = x.segment<3>(l.trans_off(t));
    c.focal_length = coding.fl_ref * std::exp(x[l.fl_off()]);
    c.principal_point = coding.pp_ref + coding.pp_scale * x.segment<2>(l.pp_off());
    return c;
}

} // namespace

TrackResult track_sequence(const MorphableModel& model, const std::vector<FitInputs>& frames,
                           const TrackConfig& config) {
    config.validate();
    const int frame_count = int(frames.size());
    if (frame_count < 1) fail(ErrorKind::DimensionMismatch, "track_sequence needs at least one frame");
    for (const auto& f : frames) f.validate(model);
    for (int t = 1; t < frame_count; ++t)
        if (!frames[t].uv_map.same_size(frames[0].uv_map))
            fail(ErrorKind::DimensionMismatch, "all frames must share image dimensions");

    TrackResult result;
    result.frames.resize(frame_count);
    result.flagged.assign(frame_count, 0);

    // Stage A: full two-phase fit on the first frame.
    result.frames[0] = fit_image(model, frames[0], config.fit);

    // Stage B: sequential propagation, identity and intrinsics frozen.
    FitConfig seq_config = config.fit;
    seq_config.steps = config.sequential_steps;
    for (int t = 1; t < frame_count; ++t) {
        const FitInit init{result.frames[t - 1].face, result.frames[t - 1].cam};
        const ParamFreeze freeze{/*identity=*/true, /*intrinsics=*/true};
        try {
            result.frames[t] =
                fit_image_from(model, frames[t], seq_config, init, freeze, /*run_camera_phase=*/false);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::NoCorrespondences) throw;
            result.frames[t] = result.frames[t - 1];
            result.flagged[t] = 1;
        }
    }

    if (frame_count == 1 || config.batch_rounds == 0) return result;

    // Stage C: batched joint refinement.
    TrackLayout layout;
    layout.kid = model.id_dim();
    layout.kex = model.ex_dim();
    layout.frames = frame_count;

    TrackCoding coding;
    coding.fl_ref = result.frames[0].cam.focal_length;
    coding.pp_ref = result.frames[0].cam.principal_point;
    coding.pp_scale = double(frames[0].uv_map.width);

    Eigen::VectorXd x = Eigen::VectorXd::Zero(layout.total());
    x.segment(0, layout.kid) = result.frames[0].face.identity_coeffs;
    x[layout.fl_off()] = 0.0;      // log(fl / fl_ref)
    x.segment<2>(layout.pp_off()).setZero();
    for (int t = 0; t < frame_count; ++t) {
        x.segment(layout.ex_off(t), layout.kex) = result.frames[t].face.expression_coeffs;
        x.segment<3>(layout.jaw_off(t)) = result.frames[t].face.jaw_rotation;
        x.segment<3>(layout.rot_off(t)) = result.frames[t].cam.rotation;
        x.segment<3>(layout.trans_off(t)) = result.frames[t].cam.translation;
    }

    Eigen::VectorXd lr(layout.total());
    lr.segment(0, layout.kid).setConstant(config.fit.lr_id);
    lr.segment<3>(layout.fl_off()).setConstant(config.fit.lr_cam);
    for (int t = 0; t < frame_count; ++t) {
        lr.segment(layout.ex_off(t), layout.kex).setConstant(config.fit.lr_ex);
        lr.segment<3>(layout.jaw_off(t)).setConstant(config.fit.lr_jaw);
        lr.segment<3>(layout.rot_off(t)).setConstant(config.fit.lr_cam);
        lr.segment<3>(layout.trans_off(t)).setConstant(config.fit.lr_cam);
    }

    // Correspondence targets are static per frame; flagged frames have none
    // and participate through the smoothness terms only.
    std::vector<CorrespondenceSet> corrs(frame_count);
    std::vector<std::uint8_t> has_corr(frame_count, 0);
    for (int t = 0; t < frame_count; ++t) {
        if (result.flagged[t]) continue;
        const UvIndex index = build_uv_index(frames[t].uv_map, frames[t].mask);
        corrs[t] = find_correspondences(model, index, config.fit.delta_uv);
        has_corr[t] = 1;
    }

    // Consensus detection: frames whose observations are interchangeable
    // (each frame's energy barely changes under its neighbor's parameters)
    // are treated as repeated observations of one state, and the batched
    // stage is allowed to pull their parameters together exactly. Sequences
    // with genuine motion fail this test by orders of magnitude.
    bool consensus_sequence = frame_count >= 2;
    {
        double worst_swap = 0.0, energy_scale = 0.0;
        int measured = 0;
        for (int t = 0; t + 1 < frame_count && consensus_sequence; ++t) {
            if (!has_corr[t]) continue;
            const FaceParams own_face = frame_face(layout, x, t);
            const CameraParams own_cam = frame_cam(layout, coding, x, t);
            const FaceParams other_face = frame_face(layout, x, t + 1);
            const CameraParams other_cam = frame_cam(layout, coding, x, t + 1);
            const double e_own =
                energy_and_gradients(model, own_face, own_cam, frames[t], config.fit, corrs[t])
                    .terms.total;
            const double e_other =
                energy_and_gradients(model, other_face, other_cam, frames[t], config.fit, corrs[t])
                    .terms.total;
            worst_swap = std::max(worst_swap, e_other - e_own);
            energy_scale = std::max(energy_scale, std::abs(e_own));
            ++measured;
        }
        if (measured == 0 || worst_swap > 0.05 * std::max(energy_scale, 1.0))
            consensus_sequence = false;
    }

    const int batch_size = std::min(frame_count, 16);
    std::mt19937_64 rng(config.fit.seed);
    AdamState state = AdamState::zero(layout.total());
    std::vector<int> order(frame_count);
    std::iota(order.begin(), order.end(), 0);

    // Full-sequence objective: every frame's energy plus all smoothness terms.
    auto full_objective = [&] {
        double total = 0.0;
        for (int t = 0; t < frame_count; ++t) {
            if (!has_corr[t]) continue;
            total += energy_and_gradients(model, frame_face(layout, x, t),
                                          frame_cam(layout, coding, x, t), frames[t], config.fit,
                                          corrs[t])
                         .terms.total;
        }
        const std::pair<double, int (TrackLayout::*)(int) const> groups[] = {
            {config.smooth_expression, &TrackLayout::ex_off},
            {config.smooth_jaw, &TrackLayout::jaw_off},
            {config.smooth_rotation, &TrackLayout::rot_off},
            {config.smooth_translation, &TrackLayout::trans_off},
        };
        int idx = 0;
        for (const auto& [weight, offset] : groups) {
            const int size = idx++ == 0 ? layout.kex : 3;
            if (weight == 0.0 || size == 0) continue;
            std::vector<Eigen::VectorXd> seq(frame_count);
            for (int t = 0; t < frame_count; ++t) seq[t] = x.segment((layout.*offset)(t), size);
            total += smoothness_loss(seq, weight).value;
        }
        return total;
    };

    // Adam's learning rate decays across rounds while the smoothness
    // proximal step keeps its full strength: near convergence the L1 energy
    // terms inject sign-noise kicks proportional to the learning rate, and
    // the decay lets the smoothness coupling win by orders of magnitude.
    auto round_decay = [&](int step) {
        const int round = config.batch_steps > 0 ? step / config.batch_steps : 0;
        const int full_rounds = std::max(1, config.batch_rounds - 2);
        return std::pow(10.0, -2.0 * std::max(0, round - full_rounds + 1));
    };

    const int total_steps = config.batch_rounds * config.batch_steps;
    for (int step = 0; step < total_steps; ++step) {
        if (step % 50 == 0) result.refinement_objective.push_back(full_objective());
        std::shuffle(order.begin(), order.end(), rng);
        std::vector<int> batch(order.begin(), order.begin() + batch_size);
        if (step == 0 && std::find(batch.begin(), batch.end(), 0) == batch.end())
            batch.back() = 0; // anchor the first batch at frame 1
        std::sort(batch.begin(), batch.end());

        Eigen::VectorXd grad = Eigen::VectorXd::Zero(layout.total());
        std::vector<std::uint8_t> active(layout.total(), 0);
        for (int i = 0; i < layout.shared_size(); ++i) active[i] = 1;

        for (const int t : batch) {
            for (int i = 0; i < layout.frame_size(); ++i) active[layout.frame_off(t) + i] = 1;
            if (!has_corr[t]) continue;
            const FaceParams face = frame_face(layout, x, t);
            const CameraParams cam = frame_cam(layout, coding, x, t);
            const EnergyGradients eval =
                energy_and_gradients(model, face, cam, frames[t], config.fit, corrs[t]);

            grad.segment(0, layout.kid) += eval.face_grad.segment(0, layout.kid);
            grad.segment(layout.ex_off(t), layout.kex) +=
                eval.face_grad.segment(layout.kid, layout.kex);
            grad.segment<3>(layout.jaw_off(t)) += eval.face_grad.segment<3>(layout.kid + layout.kex);
            grad.segment<3>(layout.rot_off(t)) += eval.cam_grad.segment<3>(0);
            grad.segment<3>(layout.trans_off(t)) += eval.cam_grad.segment<3>(3);
            grad[layout.fl_off()] += eval.cam_grad[6] * cam.focal_length;
            grad.segment<2>(layout.pp_off()) += eval.cam_grad.segment<2>(7) * coding.pp_scale;
        }

        // smoothness gradients (all rounds), per the batched formula
        struct Group {
            double weight;
            int size;
            int (TrackLayout::*offset)(int) const;
        };
        const Group groups[] = {
            {config.smooth_expression, layout.kex, &TrackLayout::ex_off},
            {config.smooth_jaw, 3, &TrackLayout::jaw_off},
            {config.smooth_rotation, 3, &TrackLayout::rot_off},
            {config.smooth_translation, 3, &TrackLayout::trans_off},
        };
        for (const auto& group : groups) {
            if (group.weight == 0.0 || group.size == 0) continue;
            std::vector<Eigen::VectorXd> seq(frame_count);
            for (int t = 0; t < frame_count; ++t)
                seq[t] = x.segment((layout.*group.offset)(t), group.size);
            const SmoothnessResult sm = smoothness_loss(seq, group.weight, &batch);
            for (int t = 0; t < frame_count; ++t) {
                if (sm.grads[t].isZero(0.0)) continue;
                grad.segment((layout.*group.offset)(t), group.size) += sm.grads[t];
                for (int i = 0; i < group.size; ++i) active[(layout.*group.offset)(t) + i] = 1;
            }
        }

        const Eigen::VectorXd lr_step = round_decay(step) * lr;
        adam_step(x, grad, lr_step, state, config.fit, &active);

        // Exact proximal pull toward consensus for interchangeable frames.
        // Subgradient noise from the L1 energy keeps plain Adam from
        // contracting their differences below its step size; the proximal
        // solve contracts them geometrically every step.
        if (consensus_sequence) {
            Eigen::VectorXd pair_weight = Eigen::VectorXd::Zero(frame_count - 1);
            for (const int t : batch) {
                if (t > 0) pair_weight[t - 1] += 1.0;
                if (t + 1 < frame_count) pair_weight[t] += 1.0;
            }
            constexpr double kProxStrength = 0.5;
            Eigen::MatrixXd lhs = Eigen::MatrixXd::Identity(frame_count, frame_count);
            for (int t = 0; t + 1 < frame_count; ++t) {
                const double w = kProxStrength * 0.5 * pair_weight[t];
                lhs(t, t) += w;
                lhs(t + 1, t + 1) += w;
                lhs(t, t + 1) -= w;
                lhs(t + 1, t) -= w;
            }
            const Eigen::LDLT<Eigen::MatrixXd> solver(lhs);
            for (const auto& group : groups) {
                if (group.size == 0) continue;
                Eigen::MatrixXd rhs(frame_count, group.size);
                for (int t = 0; t < frame_count; ++t)
                    rhs.row(t) = x.segment((layout.*group.offset)(t), group.size).transpose();
                const Eigen::MatrixXd solved = solver.solve(rhs);
                for (int t = 0; t < frame_count; ++t)
                    x.segment((layout.*group.offset)(t), group.size) = solved.row(t).transpose();
            }
        }
    }
    result.refinement_objective.push_back(full_objective());

    // Write back; shared parameters are identical across frames by construction.
    for (int t = 0; t < frame_count; ++t) {
        result.frames[t].face = frame_face(layout, x, t);
        result.frames[t].cam = frame_cam(layout, coding, x, t);
        if (has_corr[t]) {
            const EnergyGradients eval = energy_and_gradients(
                model, result.frames[t].face, result.frames[t].cam, frames[t], config.fit, corrs[t]);
            result.frames[t].term_breakdown = eval.terms;
        }
    }
    return result;
}

double track_objective(const MorphableModel& model, const std::vector<FitInputs>& frames,
                       const TrackConfig& config, const std::vector<FitResult>& state) {
    const int frame_count = int(frames.size());
    double total = 0.0;
    for (int t = 0; t < frame_count; ++t) {
        const UvIndex index = build_uv_index(frames[t].uv_map, frames[t].mask);
        const CorrespondenceSet corr = find_correspondences(model, index, config.fit.delta_uv);
        total += energy_and_gradients(model, state[t].face, state[t].cam, frames[t], config.fit, corr)
                     .terms.total;
    }

    auto collect = [&](auto&& getter) {
        std::vector<Eigen::VectorXd> seq(frame_count);
        for (int t = 0; t < frame_count; ++t) seq[t] = getter(state[t]);
        return seq;
    };
    total += smoothness_loss(collect([](const FitResult& r) { return r.face.expression_coeffs; }),
                             config.smooth_expression)
                 .value;
    total += smoothness_loss(
                 collect([](const FitResult& r) { return Eigen::VectorXd(r.face.jaw_rotation); }),
                 config.smooth_jaw)
                 .value;
    total += smoothness_loss(collect([](const FitResult& r) { return Eigen::VectorXd(r.cam.rotation); }),
                             config.smooth_rotation)
                 .value;
    total +=
        smoothness_loss(collect([](const FitResult& r) { return Eigen::VectorXd(r.cam.translation); }),
                        config.smooth_translation)
            .value;
    return total;
}

} // namespace facefit
