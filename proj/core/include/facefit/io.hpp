#pragma once

#include <string>
#include <vector>

#include "facefit/camera.hpp"
#include "facefit/evalbench.hpp"
#include "facefit/fitter.hpp"
#include "facefit/geometry.hpp"
#include "facefit/image.hpp"
#include "facefit/model.hpp"
#include "facefit/tracker.hpp"

// File codecs for every artifact format. Byte layouts are documented in
// docs/formats.md; PFM/PGM round-trips are bit-exact, OBJ/PLY round-trip to
// 1e-6 through decimal text.

namespace facefit::io {

/// PFM float map: "Pf" for 1 channel, "PF" for 3. Two-channel maps are
/// written as "PF" with a zero third channel. Loaded maps are fully valid;
/// validity travels separately as a PGM mask.
MapImage load_map(const std::string& path);
void save_map(const std::string& path, const MapImage& map);

/// Binary PGM (P5, maxval 255); nonzero bytes are valid.
MapImage load_mask(const std::string& path);
void save_mask(const std::string& path, const MapImage& mask);

/// Wavefront OBJ with v / vt / f records, 1-based indices.
TriMesh load_mesh(const std::string& path, double scale = 1.0);
void save_mesh(const std::string& path, const TriMesh& mesh);

/// Ascii PLY point cloud with x y z nx ny nz and an optional integer label.
PointCloud load_pointcloud(const std::string& path, double scale = 1.0);
void save_pointcloud(const std::string& path, const PointCloud& cloud);

// JSON sidecars -----------------------------------------------------------

CameraParams load_camera_json(const std::string& path);
void save_camera_json(const std::string& path, const CameraParams& cam);

/// Face parameters as {"z_id": [...], "z_ex": [...], "jaw_theta": [...]}.
FaceParams load_params_json(const std::string& path);
void save_params_json(const std::string& path, const FaceParams& params);

/// Flat key/value fit configuration; unknown keys are rejected.
FitConfig load_fit_config_json(const std::string& path);
void save_fit_config_json(const std::string& path, const FitConfig& config);

/// Tracking configuration: fit keys plus the tracker-specific ones.
TrackConfig load_track_config_json(const std::string& path);
void save_track_config_json(const std::string& path, const TrackConfig& config);

/// 2D landmarks: {"landmarks": [{"vertex": id, "pixel": [x, y]}, ...]}.
std::vector<Landmark2d> load_landmarks2d_json(const std::string& path);
void save_landmarks2d_json(const std::string& path, const std::vector<Landmark2d>& landmarks);

/// 3D landmark pairs: {"pairs": [{"vertex": id, "point": [x, y, z]}, ...]}.
std::vector<LandmarkPair> load_landmark_pairs_json(const std::string& path);
void save_landmark_pairs_json(const std::string& path, const std::vector<LandmarkPair>& pairs);

/// Identity anchor: {"z_id": [...]}.
Eigen::VectorXd load_identity_anchor_json(const std::string& path);
void save_identity_anchor_json(const std::string& path, const Eigen::VectorXd& anchor);

void save_metrics_json(const std::string& path, const MetricsRecord& metrics);
MetricsRecord load_metrics_json(const std::string& path);

/// Appends one row (writing the header first if the file is new) to the
/// aggregate benchmark CSV: subject, split, l1_mm, l2_mm, nc, recall_2_5.
void append_metrics_csv(const std::string& path, const std::string& subject,
                        const std::string& split, const MetricsRecord& metrics);

void save_trace_csv(const std::string& path, const std::vector<double>& energy_trace);

/// Correspondence dump for debugging: vertex_id, px, py, uv_dist, accepted.
void save_correspondences_csv(const std::string& path, const CorrespondenceSet& corr);

} // namespace facefit::io
