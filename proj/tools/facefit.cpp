// facefit: fit / track / evaluate parametric head models from per-pixel
// geometric cue maps, plus a synthetic-target generator for self-testing.

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "facefit/common.hpp"
#include "facefit/evalbench.hpp"
#include "facefit/io.hpp"
#include "facefit/raster.hpp"
#include "facefit/synthetic.hpp"
#include "facefit/tracker.hpp"

namespace fs = std::filesystem;
using namespace facefit;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 2;
constexpr int kExitNoCorrespondences = 3;

MapImage load_uv_input(const std::string& path) {
    // uv maps are stored as 3-channel PFM with a zero third channel
    const MapImage raw = io::load_map(path);
    return raw.channels == 3 ? raw.first_two_channels() : raw;
}

FitInputs load_fit_inputs(const std::string& uv_path, const std::string& normal_path,
                          const std::string& mask_path) {
    FitInputs inputs;
    inputs.uv_map = load_uv_input(uv_path);
    inputs.normal_map = io::load_map(normal_path);
    inputs.mask = io::load_mask(mask_path);
    // validity of the map pixels comes from the mask file
    inputs.uv_map.valid = inputs.mask.valid;
    inputs.normal_map.valid = inputs.mask.valid;
    return inputs;
}

TriMesh posed_mesh(const MorphableModel& model, const FaceParams& face) {
    TriMesh mesh;
    mesh.vertices = model_forward(model, face);
    mesh.triangles = model.triangles;
    mesh.uv = model.vertex_uv;
    return mesh;
}

void write_fit_outputs(const std::string& out_dir, const MorphableModel& model,
                       const FitResult& result, const std::string& prefix = "") {
    fs::create_directories(out_dir);
    const std::string base = out_dir + "/" + prefix;
    io::save_params_json(base + "params.json", result.face);
    io::save_camera_json(base + "camera.json", result.cam);
    io::save_mesh(base + "mesh.obj", posed_mesh(model, result.face));
    io::save_trace_csv(base + "trace.csv", result.energy_trace);
}

std::vector<int> parse_label_list(const std::string& csv) {
    std::vector<int> labels;
    std::string token;
    for (const char c : csv + ",") {
        if (c == ',') {
            if (!token.empty()) labels.push_back(std::stoi(token));
            token.clear();
        } else {
            token.push_back(c);
        }
    }
    return labels;
}

struct FitOverrides {
    double lambda_uv = -1, lambda_n = -1, lambda_id = -1, lambda_ex = -1, lambda_lmk = -1;
    double delta_uv = -1;
    int steps = -1;
    std::int64_t seed = -1;
    int threads = 0;

    void add_flags(CLI::App* cmd) {
        cmd->add_option("--lambda-uv", lambda_uv, "Override the uv-term weight");
        cmd->add_option("--lambda-n", lambda_n, "Override the normal-term weight");
        cmd->add_option("--lambda-id", lambda_id, "Override the identity regularizer weight");
        cmd->add_option("--lambda-ex", lambda_ex, "Override the expression regularizer weight");
        cmd->add_option("--lambda-lmk", lambda_lmk, "Override the landmark-term weight");
        cmd->add_option("--delta-uv", delta_uv, "Override the uv acceptance threshold");
        cmd->add_option("--steps", steps, "Override the optimization step count");
        cmd->add_option("--seed", seed, "Random seed");
        cmd->add_option("--threads", threads, "Worker threads (0 = auto, FACEFIT_THREADS fallback)");
    }
    void apply(FitConfig& config) const {
        if (lambda_uv >= 0) config.lambda_uv = lambda_uv;
        if (lambda_n >= 0) config.lambda_n = lambda_n;
        if (lambda_id >= 0) config.lambda_id = lambda_id;
        if (lambda_ex >= 0) config.lambda_ex = lambda_ex;
        if (lambda_lmk >= 0) config.lambda_lmk = lambda_lmk;
        if (delta_uv >= 0) config.delta_uv = delta_uv;
        if (steps > 0) config.steps = steps;
        if (seed >= 0) config.seed = std::uint64_t(seed);
        if (threads > 0) config.threads = threads;
    }
};

int run(int argc, char** argv) {
    CLI::App app{"facefit: parametric head fitting from uv / normal cue maps"};
    app.require_subcommand(1);

    // ---- synth ----
    auto* synth = app.add_subcommand("synth", "Render synthetic uv/normal/mask targets");
    std::string synth_model, synth_params, synth_camera, synth_out;
    int synth_w = 512, synth_h = 512, synth_threads = 0;
    synth->add_option("--model", synth_model, "P3DM model file")->required();
    synth->add_option("--params", synth_params, "Face parameter JSON")->required();
    synth->add_option("--camera", synth_camera, "Camera JSON")->required();
    synth->add_option("--out", synth_out, "Output directory")->required();
    synth->add_option("--width", synth_w, "Image width");
    synth->add_option("--height", synth_h, "Image height");
    synth->add_option("--threads", synth_threads, "Worker threads");

    // ---- fit ----
    auto* fit = app.add_subcommand("fit", "Fit face and camera parameters to one image's maps");
    std::string fit_model, fit_uv, fit_normal, fit_mask, fit_out, fit_config_path, fit_mica,
        fit_landmarks;
    bool fit_dump_corr = false;
    FitOverrides fit_overrides;
    fit->add_option("--model", fit_model, "P3DM model file")->required();
    fit->add_option("--uv", fit_uv, "Predicted uv map (PFM)")->required();
    fit->add_option("--normal", fit_normal, "Predicted normal map (PFM)")->required();
    fit->add_option("--mask", fit_mask, "Validity mask (PGM)")->required();
    fit->add_option("--out", fit_out, "Output directory")->required();
    fit->add_option("--config", fit_config_path, "Fit configuration JSON");
    fit->add_option("--mica", fit_mica, "Identity anchor JSON");
    fit->add_option("--landmarks", fit_landmarks, "2D landmark JSON");
    fit->add_flag("--dump-correspondences", fit_dump_corr, "Write correspondences.csv");
    fit_overrides.add_flags(fit);

    // ---- track ----
    auto* track = app.add_subcommand("track", "Track a monocular frame sequence");
    std::string track_model, track_frames, track_out, track_config_path;
    FitOverrides track_overrides;
    track->add_option("--model", track_model, "P3DM model file")->required();
    track->add_option("--frames", track_frames, "Directory of frame_%05d.{uv.pfm,normal.pfm,mask.pgm}")
        ->required();
    track->add_option("--out", track_out, "Output directory")->required();
    track->add_option("--config", track_config_path, "Track configuration JSON");
    track_overrides.add_flags(track);

    // ---- eval ----
    auto* eval = app.add_subcommand("eval", "Benchmark a predicted mesh against a GT point cloud");
    std::string eval_pred, eval_gt, eval_landmarks, eval_out, eval_labels, eval_csv, eval_subject,
        eval_split = "posed", eval_aligned;
    double eval_pred_scale = 1000.0, eval_gt_scale = 1.0;
    bool eval_no_align = false;
    eval->add_option("--pred", eval_pred, "Predicted mesh (OBJ)")->required();
    eval->add_option("--gt", eval_gt, "Ground-truth point cloud (ascii PLY)")->required();
    eval->add_option("--out", eval_out, "Metrics JSON output")->required();
    eval->add_option("--landmarks", eval_landmarks, "Landmark pairs JSON (mesh vertex -> GT point)");
    eval->add_option("--mask-labels", eval_labels, "Comma-separated GT labels to keep");
    eval->add_option("--pred-scale", eval_pred_scale, "Scale applied to the mesh (default m -> mm)");
    eval->add_option("--gt-scale", eval_gt_scale, "Scale applied to the GT cloud");
    eval->add_flag("--no-align", eval_no_align, "Skip rigid alignment");
    eval->add_option("--append-csv", eval_csv, "Append a row to this aggregate CSV");
    eval->add_option("--subject", eval_subject, "Subject id for the CSV row");
    eval->add_option("--split", eval_split, "Benchmark split for the CSV row (posed|neutral)");
    eval->add_option("--aligned-mesh", eval_aligned, "Write the aligned mesh OBJ here");

    // ---- plot-overlay ----
    auto* plot = app.add_subcommand("plot-overlay", "Render a surface-distance error map");
    std::string plot_mesh, plot_ref, plot_camera, plot_out;
    int plot_w = 512, plot_h = 512, plot_threads = 0;
    double plot_scale = 1.0;
    plot->add_option("--mesh", plot_mesh, "Mesh to render (OBJ)")->required();
    plot->add_option("--ref", plot_ref, "Reference mesh measured against (OBJ)")->required();
    plot->add_option("--camera", plot_camera, "Camera JSON")->required();
    plot->add_option("--out", plot_out, "Output error map (PFM)")->required();
    plot->add_option("--width", plot_w, "Image width");
    plot->add_option("--height", plot_h, "Image height");
    plot->add_option("--scale", plot_scale, "Multiply distances (e.g. 1000 for m -> mm)");
    plot->add_option("--threads", plot_threads, "Worker threads");

    CLI11_PARSE(app, argc, argv);

    if (*synth) {
        const MorphableModel model = load_model(synth_model);
        const FaceParams params = io::load_params_json(synth_params);
        const CameraParams camera = io::load_camera_json(synth_camera);
        const RenderedMaps maps = render_maps(model, params, camera, synth_w, synth_h, synth_threads);

        fs::create_directories(synth_out);
        io::save_map(synth_out + "/uv.pfm", maps.uv_map);
        io::save_map(synth_out + "/normal.pfm", maps.normal_map);
        MapImage mask = MapImage::zeros(synth_w, synth_h, 1);
        for (int y = 0; y < synth_h; ++y)
            for (int x = 0; x < synth_w; ++x) {
                mask.at(y, x, 0) = maps.uv_map.is_valid(y, x) ? 255.0f : 0.0f;
                mask.set_valid(y, x, maps.uv_map.is_valid(y, x));
            }
        io::save_mask(synth_out + "/mask.pgm", mask);
        io::save_mesh(synth_out + "/gt_mesh.obj", posed_mesh(model, params));
        std::printf("synth: wrote uv.pfm normal.pfm mask.pgm gt_mesh.obj to %s\n",
                    synth_out.c_str());
        return kExitOk;
    }

    if (*fit) {
        const MorphableModel model = load_model(fit_model);
        FitConfig config =
            fit_config_path.empty() ? FitConfig{} : io::load_fit_config_json(fit_config_path);
        fit_overrides.apply(config);

        FitInputs inputs = load_fit_inputs(fit_uv, fit_normal, fit_mask);
        if (!fit_mica.empty()) inputs.mica_identity = io::load_identity_anchor_json(fit_mica);
        if (!fit_landmarks.empty()) inputs.landmarks2d = io::load_landmarks2d_json(fit_landmarks);

        const FitResult result = fit_image(model, inputs, config);
        write_fit_outputs(fit_out, model, result);
        if (fit_dump_corr) {
            const UvIndex index = build_uv_index(inputs.uv_map, inputs.mask);
            io::save_correspondences_csv(fit_out + "/correspondences.csv",
                                         find_correspondences(model, index, config.delta_uv));
        }
        std::printf("fit: E = %.6g (uv %.4g, normal %.4g, reg %.4g) after %d steps\n",
                    result.term_breakdown.total, result.term_breakdown.uv,
                    result.term_breakdown.normal, result.term_breakdown.reg, config.steps);
        return kExitOk;
    }

    if (*track) {
        const MorphableModel model = load_model(track_model);
        TrackConfig config =
            track_config_path.empty() ? TrackConfig{} : io::load_track_config_json(track_config_path);
        track_overrides.apply(config.fit);

        std::vector<FitInputs> frames;
        std::vector<int> indices;
        for (int i = 0; i < 100000; ++i) {
            char name[64];
            std::snprintf(name, sizeof(name), "frame_%05d", i);
            const std::string base = track_frames + "/" + name;
            if (!fs::exists(base + ".uv.pfm")) {
                if (frames.empty()) continue; // sequences may start at any index
                break;
            }
            frames.push_back(
                load_fit_inputs(base + ".uv.pfm", base + ".normal.pfm", base + ".mask.pgm"));
            indices.push_back(i);
            if (int(frames.size()) == 1 && i > 1000) break;
        }
        if (frames.empty()) fail(ErrorKind::IoFailure, "no frame_%05d.uv.pfm files in " + track_frames);

        const TrackResult result = track_sequence(model, frames, config);

        fs::create_directories(track_out);
        std::vector<int> flagged;
        for (std::size_t t = 0; t < frames.size(); ++t) {
            char prefix[64];
            std::snprintf(prefix, sizeof(prefix), "frame_%05d.", indices[t]);
            write_fit_outputs(track_out, model, result.frames[t], prefix);
            if (result.flagged[t]) flagged.push_back(indices[t]);
        }
        std::FILE* manifest = std::fopen((track_out + "/manifest.json").c_str(), "w");
        if (!manifest) fail(ErrorKind::IoFailure, "cannot write manifest.json");
        std::fprintf(manifest, "{\n  \"frame_count\": %zu,\n  \"flagged\": [", frames.size());
        for (std::size_t i = 0; i < flagged.size(); ++i)
            std::fprintf(manifest, "%s%d", i ? ", " : "", flagged[i]);
        std::fprintf(manifest, "]\n}\n");
        std::fclose(manifest);
        std::printf("track: %zu frames, %zu flagged\n", frames.size(), flagged.size());
        return kExitOk;
    }

    if (*eval) {
        const TriMesh pred = io::load_mesh(eval_pred, eval_pred_scale);
        const PointCloud gt = io::load_pointcloud(eval_gt, eval_gt_scale);

        RigidTransform transform;
        if (!eval_no_align) {
            if (eval_landmarks.empty())
                fail(ErrorKind::DegenerateLandmarks, "--landmarks required unless --no-align is set");
            transform = rigid_align(pred, gt, io::load_landmark_pairs_json(eval_landmarks));
        }
        TriMesh aligned = pred;
        aligned.vertices = transform.apply(pred.vertices);

        MetricsRecord metrics = compute_metrics(aligned, gt, parse_label_list(eval_labels));
        metrics.aligned_transform = transform;
        io::save_metrics_json(eval_out, metrics);
        if (!eval_aligned.empty()) io::save_mesh(eval_aligned, aligned);
        if (!eval_csv.empty())
            io::append_metrics_csv(eval_csv, eval_subject.empty() ? eval_pred : eval_subject,
                                   eval_split, metrics);
        std::printf("eval: L1 %.4f mm  L2 %.4f mm  NC %.4f  R2.5 %.4f\n", metrics.l1_mm,
                    metrics.l2_mm, metrics.nc, metrics.recall_2_5);
        return kExitOk;
    }

    if (*plot) {
        const TriMesh mesh = io::load_mesh(plot_mesh);
        const TriMesh ref = io::load_mesh(plot_ref);
        const CameraParams camera = io::load_camera_json(plot_camera);

        const FragmentBuffer frag =
            rasterize(mesh.vertices, mesh.triangles, camera, plot_w, plot_h, plot_threads);
        const TriangleBvh bvh(ref.vertices, ref.triangles);

        MapImage error_map = MapImage::zeros(plot_w, plot_h, 1);
        for (int y = 0; y < plot_h; ++y)
            for (int x = 0; x < plot_w; ++x) {
                if (!frag.covered(y, x)) continue;
                const std::int32_t t = frag.tri_at(y, x);
                const Eigen::Vector3d b = frag.bary_at(y, x);
                Eigen::Vector3d p = Eigen::Vector3d::Zero();
                for (int j = 0; j < 3; ++j)
                    p += b[j] * mesh.vertices.row(mesh.triangles(t, j)).transpose();
                error_map.at(y, x, 0) = float(plot_scale * bvh.nearest(p).distance);
                error_map.set_valid(y, x, true);
            }
        io::save_map(plot_out, error_map);
        std::printf("plot-overlay: wrote %s\n", plot_out.c_str());
        return kExitOk;
    }

    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return e.kind() == ErrorKind::NoCorrespondences ? kExitNoCorrespondences : kExitError;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitError;
    }
}
