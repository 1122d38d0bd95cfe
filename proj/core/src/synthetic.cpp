#include "facefit/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>

#include "facefit/geometry.hpp"
#include "facefit/raster.hpp"
#include "facefit/rotation.hpp"

namespace facefit {

TriMesh icosphere(int subdivisions) {
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Eigen::Vector3d> verts = {
        {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0},
        {0, -1, t}, {0, 1, t}, {0, -1, -t}, {0, 1, -t},
        {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1},
    };
    for (auto& v : verts) v.normalize();
    std::vector<Eigen::Vector3i> faces = {
        {0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11},
        {1, 5, 9}, {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
        {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8}, {3, 8, 9},
        {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1},
    };

    for (int s = 0; s < subdivisions; ++s) {
        std::map<std::pair<int, int>, int> midpoint;
        auto mid = [&](int a, int b) {
            const auto key = std::minmax(a, b);
            auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            verts.push_back(((verts[a] + verts[b]) * 0.5).normalized());
            const int idx = int(verts.size()) - 1;
            midpoint.emplace(key, idx);
            return idx;
        };
        std::vector<Eigen::Vector3i> next;
        next.reserve(faces.size() * 4);
        for (const auto& f : faces) {
            const int ab = mid(f[0], f[1]);
            const int bc = mid(f[1], f[2]);
            const int ca = mid(f[2], f[0]);
            next.push_back({f[0], ab, ca});
            next.push_back({f[1], bc, ab});
            next.push_back({f[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        faces = std::move(next);
    }

    TriMesh mesh;
    mesh.vertices.resize(verts.size(), 3);
    for (std::size_t i = 0; i < verts.size(); ++i) mesh.vertices.row(i) = verts[i];
    mesh.triangles.resize(faces.size(), 3);
    for (std::size_t i = 0; i < faces.size(); ++i) mesh.triangles.row(i) = faces[i];
    return mesh;
}

namespace {

constexpr double kHeadRadius = 0.1; // meters

double smoothstep(double edge0, double edge1, double x) {
    const double t = std::clamp((x - edge0) / (edge1 - edge0), 0.0, 1.0);
    return t * t * (3.0 - 2.0 * t);
}

// Twenty-island icosahedral uv atlas.
//
// The head is built by subdividing each icosahedron face independently, so
// every face owns its vertices (seam vertices are duplicated per face) and
// maps to its own triangular uv island inside a 5x4 grid cell. Within an
// island, uv is affine in the face's subdivision grid, which keeps the
// chart's stretch within ~20% of uniform across the whole sphere. Islands
// are disjoint and no mesh triangle spans two islands, so a nearest-uv
// lookup can only land on surface geodesically close to the query vertex or
// be rejected by the uv-distance gate.
struct IslandCorners {
    Eigen::Vector2d a, b, c;
};

IslandCorners island_corners(int face) {
    const int col = face % 5;
    const int row = face / 5;
    const double x0 = col * 0.2, y0 = row * 0.25;
    // upright triangle with margins inside the 0.2 x 0.25 cell
    IslandCorners isl;
    isl.a = Eigen::Vector2d(x0 + 0.025, y0 + 0.03);
    isl.b = Eigen::Vector2d(x0 + 0.175, y0 + 0.03);
    isl.c = Eigen::Vector2d(x0 + 0.100, y0 + 0.22);
    return isl;
}

} // namespace

MorphableModel sphere_head_model(int subdivisions, int id_dim, int ex_dim, std::uint32_t seed) {
    const TriMesh icosa = icosphere(0);
    const int rows = 1 << subdivisions;

    std::vector<Eigen::Vector3d> directions;
    std::vector<Eigen::Vector2d> uvs;
    std::vector<Eigen::Vector3i> tris;

    // Subdivide each icosahedron face on a geodesic grid: rows are slerped
    // along two edges, points slerped across each row, which keeps the grid
    // spacing on the sphere within a few percent of uniform. uv interpolates
    // the face's island corners with the same grid coordinates, so the chart
    // scale is near-constant over every island.
    auto slerp = [](const Eigen::Vector3d& u, const Eigen::Vector3d& v, double t) {
        const double angle = std::acos(std::clamp(u.dot(v), -1.0, 1.0));
        if (angle < 1e-12) return u;
        const double s = std::sin(angle);
        return Eigen::Vector3d((std::sin((1.0 - t) * angle) / s) * u + (std::sin(t * angle) / s) * v);
    };
    for (int face = 0; face < icosa.triangle_count(); ++face) {
        const Eigen::Vector3d fa = icosa.vertices.row(icosa.triangles(face, 0));
        const Eigen::Vector3d fb = icosa.vertices.row(icosa.triangles(face, 1));
        const Eigen::Vector3d fc = icosa.vertices.row(icosa.triangles(face, 2));
        const IslandCorners island = island_corners(face);

        const int base = int(directions.size());
        auto grid_index = [&](int i, int j) { // i along a->b, j along a->c, i + j <= rows
            return base + (j * (2 * rows + 3 - j)) / 2 + i;
        };
        for (int j = 0; j <= rows; ++j) {
            const double tc = double(j) / rows;
            const Eigen::Vector3d row_start = slerp(fa, fc, tc);
            const Eigen::Vector3d row_end = slerp(fb, fc, tc);
            for (int i = 0; i + j <= rows; ++i) {
                const double ti = rows == j ? 0.0 : double(i) / (rows - j);
                directions.push_back(slerp(row_start, row_end, ti).normalized());
                const double wb = double(i) / rows, wc = tc;
                uvs.push_back((1.0 - wb - wc) * island.a + wb * island.b + wc * island.c);
            }
        }
        for (int j = 0; j < rows; ++j)
            for (int i = 0; i + j < rows; ++i) {
                tris.emplace_back(grid_index(i, j), grid_index(i + 1, j), grid_index(i, j + 1));
                if (i + j + 1 < rows)
                    tris.emplace_back(grid_index(i + 1, j), grid_index(i + 1, j + 1),
                                      grid_index(i, j + 1));
            }
    }

    const int n = int(directions.size());
    MorphableModel model;
    model.triangles.resize(tris.size(), 3);
    for (std::size_t t = 0; t < tris.size(); ++t) model.triangles.row(t) = tris[t];
    model.template_vertices.resize(n, 3);
    model.vertex_uv.resize(n, 2);
    model.jaw_weights.resize(n);

    // Fixed relief baked into the template (nose-like protrusion, brow and
    // cheek swells): richer depth structure strengthens perspective cues and
    // varies the rendered normals.
    auto template_radius = [](const Eigen::Vector3d& d) {
        auto bump = [&](const Eigen::Vector3d& center, double width, double height) {
            const double angle = std::acos(std::clamp(center.normalized().dot(d), -1.0, 1.0));
            return height * std::exp(-(angle * angle) / (width * width));
        };
        double r = 1.0;
        r += bump({0.0, 0.1, -1.0}, 0.35, 0.22);   // nose
        r += bump({0.0, -0.45, -0.9}, 0.55, 0.08); // brow
        r += bump({-0.55, 0.25, -0.8}, 0.45, 0.10);
        r += bump({0.55, 0.25, -0.8}, 0.45, 0.10); // cheeks
        r -= bump({0.0, 0.72, -0.7}, 0.40, 0.06);  // chin hollow
        return kHeadRadius * r;
    };

    for (int v = 0; v < n; ++v) {
        const Eigen::Vector3d& d = directions[v];
        const double radius = template_radius(d);
        for (int c = 0; c < 3; ++c)
            model.template_vertices(v, c) = double(float(radius * d[c]));
        model.vertex_uv(v, 0) = double(float(std::clamp(uvs[v].x(), 0.0, 1.0)));
        model.vertex_uv(v, 1) = double(float(std::clamp(uvs[v].y(), 0.0, 1.0)));
        // jaw region: the lower part of the head (+y is down)
        model.jaw_weights[v] = double(float(smoothstep(0.2, 0.7, d.y())));
    }

    model.jaw_joint = Eigen::Vector3d(0.0, double(float(0.4 * kHeadRadius)), 0.0);

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::uniform_real_distribution<double> freq(2.5, 4.5);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);

    // Each basis column is a localized Gaussian bump pushing a patch of the
    // surface along a fixed direction, the way face bases deform local
    // regions (jaw, cheeks, brow). Localized fields matter beyond realism:
    // globally smooth fields could absorb the image-space residual of a
    // focal-length / distance trade at negligible regularizer cost, making
    // the camera unidentifiable. Fields depend on the template direction
    // alone, so seam copies always move together and the surface stays
    // crack-free. The net inflation component is projected out as well.
    auto make_basis = [&](int k, double rms) {
        Eigen::MatrixXd basis(3 * n, k);
        std::uniform_real_distribution<double> width(0.45, 0.85); // radians
        for (int col = 0; col < k; ++col) {
            Eigen::Vector3d center(unit(rng), unit(rng), unit(rng));
            while (center.norm() < 1e-3) center = Eigen::Vector3d(unit(rng), unit(rng), unit(rng));
            center.normalize();
            Eigen::Vector3d push(unit(rng), unit(rng), unit(rng));
            while (push.norm() < 1e-3) push = Eigen::Vector3d(unit(rng), unit(rng), unit(rng));
            push.normalize();
            const double w = width(rng);

            Eigen::VectorXd column(3 * n);
            for (int v = 0; v < n; ++v) {
                const double angle = std::acos(std::clamp(center.dot(directions[v]), -1.0, 1.0));
                const double g = std::exp(-(angle * angle) / (w * w));
                column.segment<3>(3 * v) = g * push;
            }
            double mean_radial = 0.0;
            for (int v = 0; v < n; ++v) mean_radial += column.segment<3>(3 * v).dot(directions[v]);
            mean_radial /= n;
            double sum2 = 0.0;
            for (int v = 0; v < n; ++v) {
                column.segment<3>(3 * v) -= mean_radial * directions[v];
                sum2 += column.segment<3>(3 * v).squaredNorm();
            }
            column *= rms / std::sqrt(sum2 / n);
            for (int i = 0; i < column.size(); ++i) basis(i, col) = double(float(column[i]));
        }
        return basis;
    };
    model.id_basis = make_basis(id_dim, 0.008);
    model.ex_basis = make_basis(ex_dim, 0.0045);

    // landmarks spread over the visible (front, -z) hemisphere
    const Eigen::Vector3d landmark_dirs[] = {
        {0.0, 0.0, -1.0},          // nose tip
        {-0.35, -0.25, -0.9},      // eyes
        {0.35, -0.25, -0.9},
        {-0.3, 0.35, -0.88},       // mouth corners
        {0.3, 0.35, -0.88},
        {0.0, 0.6, -0.8},          // chin
        {0.0, -0.55, -0.84},       // forehead
        {-0.6, 0.05, -0.78},       // cheeks
        {0.6, 0.05, -0.78},
    };
    for (const auto& dir : landmark_dirs) {
        const Eigen::Vector3d want = dir.normalized();
        int best = 0;
        double best_dot = -2.0;
        for (int v = 0; v < n; ++v) {
            const double dot = want.dot(directions[v]);
            if (dot > best_dot) {
                best_dot = dot;
                best = v;
            }
        }
        if (std::find(model.landmark_vertex_ids.begin(), model.landmark_vertex_ids.end(), best) ==
            model.landmark_vertex_ids.end())
            model.landmark_vertex_ids.push_back(best);
    }

    model.validate();
    return model;
}

FaceParams sample_face_params(const MorphableModel& model, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> coeff(-1.0, 1.0);
    std::uniform_real_distribution<double> jaw_angle(0.0, 0.25);

    FaceParams params = FaceParams::zero(model);
    for (int k = 0; k < model.id_dim(); ++k) params.identity_coeffs[k] = coeff(rng);
    for (int k = 0; k < model.ex_dim(); ++k) params.expression_coeffs[k] = coeff(rng);
    // jaws hinge: opening about the lateral axis
    params.jaw_rotation = Eigen::Vector3d(jaw_angle(rng), 0.0, 0.0);
    return params;
}

CameraParams sample_camera(const MorphableModel& model, int width, int height,
                           std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_real_distribution<double> angle(0.0, 0.18);
    std::uniform_real_distribution<double> log_fl(-0.12, 0.12);
    std::uniform_real_distribution<double> depth_per_fl(0.50, 0.60);
    std::uniform_real_distribution<double> lateral(-0.03, 0.03);
    std::uniform_real_distribution<double> pp_jitter(-0.02, 0.02);

    CameraParams cam;
    Eigen::Vector3d axis(u(rng), u(rng), u(rng));
    while (axis.norm() < 1e-3) axis = Eigen::Vector3d(u(rng), u(rng), u(rng));
    axis.normalize();
    cam.rotation = angle(rng) * axis;
    cam.focal_length = double(std::max(width, height)) * std::exp(log_fl(rng));
    cam.principal_point =
        Eigen::Vector2d(width / 2.0 + pp_jitter(rng) * width, height / 2.0 + pp_jitter(rng) * width);

    // Depth scales with focal length (a face crop has roughly constant
    // apparent size), so focal recovery must come from perspective cues.
    const double depth = depth_per_fl(rng) * cam.focal_length / double(std::max(width, height));
    const Eigen::Vector3d centroid = model.template_vertices.colwise().mean();
    cam.translation = Eigen::Vector3d(lateral(rng), lateral(rng), depth) -
                      axis_angle_to_matrix(cam.rotation) * centroid;
    return cam;
}

FitInputs render_fit_inputs(const MorphableModel& model, const FaceParams& face,
                            const CameraParams& cam, int width, int height, int threads) {
    const RenderedMaps maps = render_maps(model, face, cam, width, height, threads);
    FitInputs inputs;
    inputs.uv_map = maps.uv_map;
    inputs.normal_map = maps.normal_map;
    inputs.mask = MapImage::zeros(width, height, 1);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const bool covered = maps.uv_map.is_valid(y, x);
            inputs.mask.at(y, x, 0) = covered ? 255.0f : 0.0f;
            inputs.mask.set_valid(y, x, covered);
        }
    return inputs;
}

} // namespace facefit
