#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "facefit/geometry.hpp"

namespace facefit {

/// Parametric head model: linear identity/expression blendshapes on a
/// template mesh plus a single linear-blend-skinned jaw joint.
///
/// Blendshape bases are stored flattened as 3N x K matrices; column k holds
/// the displacement (x0,y0,z0,x1,...) of basis vector k.
struct MorphableModel {
    Eigen::MatrixX3d template_vertices; // N x 3, meters
    Eigen::MatrixX3i triangles;         // F x 3
    Eigen::MatrixXd id_basis;           // 3N x K_id
    Eigen::MatrixXd ex_basis;           // 3N x K_ex
    Eigen::Vector3d jaw_joint;          // meters
    Eigen::VectorXd jaw_weights;        // N, in [0,1]
    Eigen::MatrixX2d vertex_uv;         // N x 2, in [0,1]^2
    std::vector<int> landmark_vertex_ids;

    int vertex_count() const { return static_cast<int>(template_vertices.rows()); }
    int triangle_count() const { return static_cast<int>(triangles.rows()); }
    int id_dim() const { return static_cast<int>(id_basis.cols()); }
    int ex_dim() const { return static_cast<int>(ex_basis.cols()); }

    /// Checks every structural invariant (index bounds, value ranges,
    /// finiteness, non-degenerate triangles); throws naming the offending
    /// field.
    void validate() const;
};

/// The face-side optimization unknowns.
struct FaceParams {
    Eigen::VectorXd identity_coeffs;   // K_id
    Eigen::VectorXd expression_coeffs; // K_ex
    Eigen::Vector3d jaw_rotation = Eigen::Vector3d::Zero(); // axis-angle, radians

    static FaceParams zero(const MorphableModel& model);
    int dof() const {
        return static_cast<int>(identity_coeffs.size() + expression_coeffs.size()) + 3;
    }
};

/// Posed vertex positions: template + blendshape offsets, then the jaw
/// rotation about jaw_joint blended per vertex by jaw_weights.
Eigen::MatrixX3d model_forward(const MorphableModel& model, const FaceParams& params);

/// Analytic Jacobian of model_forward, shaped 3N x (K_id + K_ex + 3) with
/// columns ordered [identity | expression | jaw]. Row layout matches the
/// flattened vertex array (x0,y0,z0,x1,...).
Eigen::MatrixXd model_forward_jacobian(const MorphableModel& model, const FaceParams& params);

/// Loads a P3DM1 binary model file (see docs/formats.md) and validates it.
MorphableModel load_model(const std::string& path);

/// Writes the P3DM1 binary encoding of `model`.
void save_model(const std::string& path, const MorphableModel& model);

} // namespace facefit
