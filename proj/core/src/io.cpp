#include "facefit/io.hpp"

#include <cctype>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "binary_util.hpp"

namespace facefit::io {

using nlohmann::json;

namespace {

// Reads one whitespace-separated token, skipping '#' comments (PNM style).
std::string read_pnm_token(detail::FileReader& in) {
    std::string tok;
    int c;
    while ((c = std::fgetc(in.f)) != EOF) {
        ++in.offset;
        if (c == '#') {
            while ((c = std::fgetc(in.f)) != EOF) {
                ++in.offset;
                if (c == '\n') break;
            }
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty()) break;
            continue;
        }
        tok.push_back(char(c));
    }
    if (tok.empty())
        fail(ErrorKind::IoFailure, "'" + in.path + "' truncated at byte offset " + std::to_string(in.offset));
    return tok;
}

long parse_positive(const std::string& tok, const std::string& path, const char* what) {
    char* end = nullptr;
    const long v = std::strtol(tok.c_str(), &end, 10);
    if (end == tok.c_str() || *end != '\0' || v <= 0)
        fail(ErrorKind::MalformedHeader, "'" + path + "': bad " + std::string(what) + " '" + tok + "'");
    return v;
}

json parse_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::IoFailure, "cannot open '" + path + "' for reading");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        fail(ErrorKind::MalformedHeader, "'" + path + "': " + e.what());
    }
    return j;
}

void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) fail(ErrorKind::IoFailure, "cannot open '" + path + "' for writing");
    out << j.dump(2) << "\n";
}

Eigen::VectorXd vector_from_json(const json& j, const std::string& key, const std::string& path) {
    if (!j.contains(key))
        fail(ErrorKind::MalformedHeader, "'" + path + "': missing key '" + key + "'");
    const auto& arr = j.at(key);
    if (!arr.is_array())
        fail(ErrorKind::MalformedHeader, "'" + path + "': key '" + key + "' is not an array");
    Eigen::VectorXd v(arr.size());
    for (std::size_t i = 0; i < arr.size(); ++i) v[i] = arr[i].get<double>();
    return v;
}

json vector_to_json(const Eigen::VectorXd& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

} // namespace

// ---- PFM ----------------------------------------------------------------

MapImage load_map(const std::string& path) {
    detail::FileReader in(path);
    const std::string magic = read_pnm_token(in);
    int channels;
    if (magic == "PF")
        channels = 3;
    else if (magic == "Pf")
        channels = 1;
    else
        fail(ErrorKind::MalformedHeader, "'" + path + "': expected PFM magic 'PF' or 'Pf', got '" + magic + "'");

    const int width = int(parse_positive(read_pnm_token(in), path, "width"));
    const int height = int(parse_positive(read_pnm_token(in), path, "height"));
    const double scale = std::strtod(read_pnm_token(in).c_str(), nullptr);
    if (scale == 0.0) fail(ErrorKind::MalformedHeader, "'" + path + "': zero scale");
    const bool little_endian = scale < 0.0;

    MapImage img = MapImage::zeros(width, height, channels, /*all_valid=*/true);
    std::vector<float> row(std::size_t(width) * channels);
    // PFM stores rows bottom-to-top.
    for (int y = height - 1; y >= 0; --y) {
        in.read_f32_array(row.data(), row.size());
        if (!little_endian)
            for (float& f : row) {
                std::uint32_t bits;
                std::memcpy(&bits, &f, 4);
                bits = __builtin_bswap32(bits);
                std::memcpy(&f, &bits, 4);
            }
        std::memcpy(&img.data[std::size_t(y) * width * channels], row.data(), row.size() * 4);
    }
    return img;
}

void save_map(const std::string& path, const MapImage& map) {
    if (map.channels < 1 || map.channels > 3)
        fail(ErrorKind::DimensionMismatch, "PFM supports 1-3 channels, map has " + std::to_string(map.channels));
    detail::FileWriter out(path);
    const bool gray = map.channels == 1;
    char header[64];
    const int n = std::snprintf(header, sizeof(header), "%s\n%d %d\n-1.0\n", gray ? "Pf" : "PF",
                                map.width, map.height);
    out.write_bytes(header, std::size_t(n));

    const int file_channels = gray ? 1 : 3;
    std::vector<float> row(std::size_t(map.width) * file_channels, 0.0f);
    for (int y = map.height - 1; y >= 0; --y) {
        for (int x = 0; x < map.width; ++x)
            for (int c = 0; c < file_channels; ++c)
                row[std::size_t(x) * file_channels + c] = c < map.channels ? map.at(y, x, c) : 0.0f;
        out.write_f32_array(row.data(), row.size());
    }
}

// ---- PGM ----------------------------------------------------------------

MapImage load_mask(const std::string& path) {
    detail::FileReader in(path);
    const std::string magic = read_pnm_token(in);
    if (magic != "P5")
        fail(ErrorKind::MalformedHeader, "'" + path + "': expected PGM magic 'P5', got '" + magic + "'");
    const int width = int(parse_positive(read_pnm_token(in), path, "width"));
    const int height = int(parse_positive(read_pnm_token(in), path, "height"));
    const long maxval = parse_positive(read_pnm_token(in), path, "maxval");
    if (maxval > 255)
        fail(ErrorKind::MalformedHeader, "'" + path + "': 16-bit PGM unsupported (maxval " +
                                             std::to_string(maxval) + ")");

    MapImage img = MapImage::zeros(width, height, 1);
    std::vector<std::uint8_t> row(width);
    for (int y = 0; y < height; ++y) {
        in.read_bytes(row.data(), row.size());
        for (int x = 0; x < width; ++x) {
            img.at(y, x, 0) = float(row[x]);
            img.set_valid(y, x, row[x] != 0);
        }
    }
    return img;
}

void save_mask(const std::string& path, const MapImage& mask) {
    if (mask.channels != 1)
        fail(ErrorKind::DimensionMismatch, "mask must have 1 channel, has " + std::to_string(mask.channels));
    detail::FileWriter out(path);
    char header[64];
    const int n = std::snprintf(header, sizeof(header), "P5\n%d %d\n255\n", mask.width, mask.height);
    out.write_bytes(header, std::size_t(n));
    std::vector<std::uint8_t> row(mask.width);
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            const float v = mask.at(y, x, 0);
            row[x] = std::uint8_t(std::min(255.0f, std::max(0.0f, std::round(v))));
        }
        out.write_bytes(row.data(), row.size());
    }
}

// ---- OBJ ----------------------------------------------------------------

namespace {

int parse_obj_index(const std::string& token, int count, const std::string& path, int line_no) {
    // take the vertex index before any '/'
    const std::size_t slash = token.find('/');
    const std::string head = slash == std::string::npos ? token : token.substr(0, slash);
    char* end = nullptr;
    const long idx = std::strtol(head.c_str(), &end, 10);
    if (end == head.c_str() || *end != '\0')
        fail(ErrorKind::MalformedHeader,
             "'" + path + "' line " + std::to_string(line_no) + ": bad face token '" + token + "'");
    if (idx < 1 || idx > count)
        fail(ErrorKind::IndexOutOfRange, "'" + path + "' line " + std::to_string(line_no) +
                                             ": face index " + std::to_string(idx) +
                                             " outside 1.." + std::to_string(count));
    return int(idx) - 1;
}

} // namespace

TriMesh load_mesh(const std::string& path, double scale) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::IoFailure, "cannot open '" + path + "' for reading");

    std::vector<Eigen::Vector3d> verts;
    std::vector<Eigen::Vector2d> uvs;
    std::vector<Eigen::Vector3i> tris;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ss(line);
        std::string tag;
        if (!(ss >> tag) || tag.empty() || tag[0] == '#') continue;
        if (tag == "v") {
            Eigen::Vector3d p;
            if (!(ss >> p.x() >> p.y() >> p.z()))
                fail(ErrorKind::MalformedHeader, "'" + path + "' line " + std::to_string(line_no) + ": bad vertex");
            verts.push_back(p * scale);
        } else if (tag == "vt") {
            Eigen::Vector2d t;
            if (!(ss >> t.x() >> t.y()))
                fail(ErrorKind::MalformedHeader, "'" + path + "' line " + std::to_string(line_no) + ": bad texcoord");
            uvs.push_back(t);
        } else if (tag == "f") {
            std::vector<int> corners;
            std::string token;
            while (ss >> token)
                corners.push_back(parse_obj_index(token, int(verts.size()), path, line_no));
            if (corners.size() < 3)
                fail(ErrorKind::MalformedHeader, "'" + path + "' line " + std::to_string(line_no) + ": face with < 3 corners");
            for (std::size_t i = 2; i < corners.size(); ++i)
                tris.emplace_back(corners[0], corners[i - 1], corners[i]);
        }
        // other records (vn, o, g, s, usemtl, ...) are ignored
    }

    TriMesh mesh;
    mesh.vertices.resize(verts.size(), 3);
    for (std::size_t i = 0; i < verts.size(); ++i) mesh.vertices.row(i) = verts[i];
    mesh.triangles.resize(tris.size(), 3);
    for (std::size_t i = 0; i < tris.size(); ++i) mesh.triangles.row(i) = tris[i];
    if (uvs.size() == verts.size() && !uvs.empty()) {
        mesh.uv.resize(uvs.size(), 2);
        for (std::size_t i = 0; i < uvs.size(); ++i) mesh.uv.row(i) = uvs[i];
    }
    return mesh;
}

void save_mesh(const std::string& path, const TriMesh& mesh) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) fail(ErrorKind::IoFailure, "cannot open '" + path + "' for writing");
    const bool with_uv = mesh.has_uv();
    for (int v = 0; v < mesh.vertex_count(); ++v)
        std::fprintf(f, "v %.9g %.9g %.9g\n", mesh.vertices(v, 0), mesh.vertices(v, 1), mesh.vertices(v, 2));
    if (with_uv)
        for (int v = 0; v < mesh.vertex_count(); ++v)
            std::fprintf(f, "vt %.9g %.9g\n", mesh.uv(v, 0), mesh.uv(v, 1));
    for (int t = 0; t < mesh.triangle_count(); ++t) {
        const int a = mesh.triangles(t, 0) + 1, b = mesh.triangles(t, 1) + 1, c = mesh.triangles(t, 2) + 1;
        if (with_uv)
            std::fprintf(f, "f %d/%d %d/%d %d/%d\n", a, a, b, b, c, c);
        else
            std::fprintf(f, "f %d %d %d\n", a, b, c);
    }
    std::fclose(f);
}

// ---- PLY ----------------------------------------------------------------

PointCloud load_pointcloud(const std::string& path, double scale) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::IoFailure, "cannot open '" + path + "' for reading");

    std::string line;
    if (!std::getline(in, line) || line != "ply")
        fail(ErrorKind::MalformedHeader, "'" + path + "': missing 'ply' magic");
    if (!std::getline(in, line) || line.rfind("format ascii", 0) != 0)
        fail(ErrorKind::MalformedHeader, "'" + path + "': only ascii PLY is supported");

    long count = -1;
    std::vector<std::string> properties;
    bool in_vertex_element = false;
    while (std::getline(in, line)) {
        std::istringstream ss(line);
        std::string tag;
        ss >> tag;
        if (tag == "comment") continue;
        if (tag == "element") {
            std::string name;
            long n = 0;
            ss >> name >> n;
            if (name == "vertex") {
                count = n;
                in_vertex_element = true;
            } else if (n > 0) {
                fail(ErrorKind::MalformedHeader, "'" + path + "': unsupported element '" + name + "'");
            } else {
                in_vertex_element = false;
            }
        } else if (tag == "property") {
            if (!in_vertex_element) continue;
            std::string type, name;
            ss >> type >> name;
            if (type == "list")
                fail(ErrorKind::MalformedHeader, "'" + path + "': list properties unsupported");
            properties.push_back(name);
        } else if (tag == "end_header") {
            break;
        } else if (tag.empty()) {
            continue;
        } else {
            fail(ErrorKind::MalformedHeader, "'" + path + "': unexpected header line '" + line + "'");
        }
    }
    if (count < 0) fail(ErrorKind::MalformedHeader, "'" + path + "': no vertex element");

    auto column = [&](const char* name) {
        for (std::size_t i = 0; i < properties.size(); ++i)
            if (properties[i] == name) return int(i);
        return -1;
    };
    const int cx = column("x"), cy = column("y"), cz = column("z");
    const int cnx = column("nx"), cny = column("ny"), cnz = column("nz");
    const int clabel = column("label");
    if (cx < 0 || cy < 0 || cz < 0)
        fail(ErrorKind::MalformedHeader, "'" + path + "': missing position property");
    if (cnx < 0 || cny < 0 || cnz < 0)
        fail(ErrorKind::MalformedHeader, "'" + path + "': missing normal property (nx/ny/nz)");

    PointCloud cloud;
    cloud.points.resize(count, 3);
    cloud.normals.resize(count, 3);
    if (clabel >= 0) cloud.labels.resize(count);

    std::vector<double> values(properties.size());
    for (long i = 0; i < count; ++i) {
        if (!std::getline(in, line))
            fail(ErrorKind::IoFailure, "'" + path + "': truncated at vertex " + std::to_string(i));
        std::istringstream ss(line);
        for (std::size_t c = 0; c < values.size(); ++c)
            if (!(ss >> values[c]))
                fail(ErrorKind::MalformedHeader, "'" + path + "': bad vertex line " + std::to_string(i));
        cloud.points.row(i) << values[cx] * scale, values[cy] * scale, values[cz] * scale;
        cloud.normals.row(i) << values[cnx], values[cny], values[cnz];
        if (clabel >= 0) cloud.labels[i] = int(std::lround(values[clabel]));
    }
    return cloud;
}

void save_pointcloud(const std::string& path, const PointCloud& cloud) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) fail(ErrorKind::IoFailure, "cannot open '" + path + "' for writing");
    std::fprintf(f, "ply\nformat ascii 1.0\nelement vertex %d\n", cloud.size());
    std::fprintf(f, "property float x\nproperty float y\nproperty float z\n");
    std::fprintf(f, "property float nx\nproperty float ny\nproperty float nz\n");
    if (cloud.has_labels()) std::fprintf(f, "property int label\n");
    std::fprintf(f, "end_header\n");
    for (int i = 0; i < cloud.size(); ++i) {
        std::fprintf(f, "%.9g %.9g %.9g %.9g %.9g %.9g", cloud.points(i, 0), cloud.points(i, 1),
                     cloud.points(i, 2), cloud.normals(i, 0), cloud.normals(i, 1), cloud.normals(i, 2));
        if (cloud.has_labels()) std::fprintf(f, " %d", cloud.labels[i]);
        std::fprintf(f, "\n");
    }
    std::fclose(f);
}

// ---- JSON sidecars --------------------------------------------------------

CameraParams load_camera_json(const std::string& path) {
    const json j = parse_json_file(path);
    CameraParams cam;
    const Eigen::VectorXd rot = vector_from_json(j, "rotation", path);
    const Eigen::VectorXd tr = vector_from_json(j, "translation", path);
    const Eigen::VectorXd pp = vector_from_json(j, "principal_point", path);
    if (rot.size() != 3 || tr.size() != 3 || pp.size() != 2)
        fail(ErrorKind::DimensionMismatch, "'" + path + "': camera vector sizes must be 3/3/2");
    if (!j.contains("focal_length"))
        fail(ErrorKind::MalformedHeader, "'" + path + "': missing key 'focal_length'");
    cam.rotation = rot;
    cam.translation = tr;
    cam.principal_point = pp;
    cam.focal_length = j.at("focal_length").get<double>();
    if (!(cam.focal_length > 0.0))
        fail(ErrorKind::NonFiniteData, "'" + path + "': focal_length must be positive");
    return cam;
}

void save_camera_json(const std::string& path, const CameraParams& cam) {
    json j;
    j["rotation"] = vector_to_json(cam.rotation);
    j["translation"] = vector_to_json(cam.translation);
    j["focal_length"] = cam.focal_length;
    j["principal_point"] = vector_to_json(cam.principal_point);
    write_json_file(path, j);
}

FaceParams load_params_json(const std::string& path) {
    const json j = parse_json_file(path);
    FaceParams p;
    p.identity_coeffs = vector_from_json(j, "z_id", path);
    p.expression_coeffs = vector_from_json(j, "z_ex", path);
    const Eigen::VectorXd jaw = vector_from_json(j, "jaw_theta", path);
    if (jaw.size() != 3)
        fail(ErrorKind::DimensionMismatch, "'" + path + "': jaw_theta must have 3 entries");
    p.jaw_rotation = jaw;
    return p;
}

void save_params_json(const std::string& path, const FaceParams& params) {
    json j;
    j["z_id"] = vector_to_json(params.identity_coeffs);
    j["z_ex"] = vector_to_json(params.expression_coeffs);
    j["jaw_theta"] = vector_to_json(params.jaw_rotation);
    write_json_file(path, j);
}

namespace {

struct ConfigField {
    const char* key;
    double* d = nullptr;
    int* i = nullptr;
    std::uint64_t* u = nullptr;
};

std::vector<ConfigField> fit_config_fields(FitConfig& c) {
    return {
        {"lambda_uv", &c.lambda_uv}, {"lambda_n", &c.lambda_n}, {"lambda_id", &c.lambda_id},
        {"lambda_ex", &c.lambda_ex}, {"lambda_lmk", &c.lambda_lmk}, {"lr_id", &c.lr_id},
        {"lr_ex", &c.lr_ex}, {"lr_jaw", &c.lr_jaw}, {"lr_cam", &c.lr_cam},
        {"steps", nullptr, &c.steps}, {"delta_uv", &c.delta_uv},
        {"adam_beta1", &c.adam_beta1}, {"adam_beta2", &c.adam_beta2}, {"adam_eps", &c.adam_eps},
        {"corr_refresh_interval", nullptr, &c.corr_refresh_interval},
        {"seed", nullptr, nullptr, &c.seed}, {"threads", nullptr, &c.threads},
    };
}

std::vector<ConfigField> track_config_fields(TrackConfig& c) {
    auto fields = fit_config_fields(c.fit);
    const std::vector<ConfigField> extra = {
        {"sequential_steps", nullptr, &c.sequential_steps},
        {"batch_rounds", nullptr, &c.batch_rounds},
        {"batch_steps", nullptr, &c.batch_steps},
        {"smooth_expression", &c.smooth_expression},
        {"smooth_jaw", &c.smooth_jaw},
        {"smooth_rotation", &c.smooth_rotation},
        {"smooth_translation", &c.smooth_translation},
    };
    fields.insert(fields.end(), extra.begin(), extra.end());
    return fields;
}

void apply_config_json(const json& j, std::vector<ConfigField> fields, const std::string& path) {
    for (const auto& [key, value] : j.items()) {
        bool known = false;
        for (auto& f : fields) {
            if (key != f.key) continue;
            known = true;
            if (f.d)
                *f.d = value.get<double>();
            else if (f.i)
                *f.i = value.get<int>();
            else
                *f.u = value.get<std::uint64_t>();
            break;
        }
        if (!known)
            fail(ErrorKind::MalformedHeader, "'" + path + "': unknown config key '" + key + "'");
    }
}

json config_to_json(std::vector<ConfigField> fields) {
    json j;
    for (auto& f : fields) {
        if (f.d)
            j[f.key] = *f.d;
        else if (f.i)
            j[f.key] = *f.i;
        else
            j[f.key] = *f.u;
    }
    return j;
}

} // namespace

FitConfig load_fit_config_json(const std::string& path) {
    FitConfig config;
    apply_config_json(parse_json_file(path), fit_config_fields(config), path);
    config.validate();
    return config;
}

void save_fit_config_json(const std::string& path, const FitConfig& config) {
    FitConfig copy = config;
    write_json_file(path, config_to_json(fit_config_fields(copy)));
}

TrackConfig load_track_config_json(const std::string& path) {
    TrackConfig config;
    apply_config_json(parse_json_file(path), track_config_fields(config), path);
    config.validate();
    return config;
}

void save_track_config_json(const std::string& path, const TrackConfig& config) {
    TrackConfig copy = config;
    write_json_file(path, config_to_json(track_config_fields(copy)));
}

std::vector<Landmark2d> load_landmarks2d_json(const std::string& path) {
    const json j = parse_json_file(path);
    if (!j.contains("landmarks"))
        fail(ErrorKind::MalformedHeader, "'" + path + "': missing key 'landmarks'");
    std::vector<Landmark2d> out;
    for (const auto& item : j.at("landmarks")) {
        Landmark2d lm;
        lm.vertex_id = item.at("vertex").get<int>();
        const auto& px = item.at("pixel");
        lm.pixel = Eigen::Vector2d(px.at(0).get<double>(), px.at(1).get<double>());
        out.push_back(lm);
    }
    return out;
}

void save_landmarks2d_json(const std::string& path, const std::vector<Landmark2d>& landmarks) {
    json arr = json::array();
    for (const auto& lm : landmarks)
        arr.push_back({{"vertex", lm.vertex_id}, {"pixel", {lm.pixel.x(), lm.pixel.y()}}});
    write_json_file(path, json{{"landmarks", arr}});
}

std::vector<LandmarkPair> load_landmark_pairs_json(const std::string& path) {
    const json j = parse_json_file(path);
    if (!j.contains("pairs"))
        fail(ErrorKind::MalformedHeader, "'" + path + "': missing key 'pairs'");
    std::vector<LandmarkPair> out;
    for (const auto& item : j.at("pairs")) {
        LandmarkPair p;
        p.vertex_id = item.at("vertex").get<int>();
        const auto& pt = item.at("point");
        p.point = Eigen::Vector3d(pt.at(0).get<double>(), pt.at(1).get<double>(), pt.at(2).get<double>());
        out.push_back(p);
    }
    return out;
}

void save_landmark_pairs_json(const std::string& path, const std::vector<LandmarkPair>& pairs) {
    json arr = json::array();
    for (const auto& p : pairs)
        arr.push_back({{"vertex", p.vertex_id}, {"point", {p.point.x(), p.point.y(), p.point.z()}}});
    write_json_file(path, json{{"pairs", arr}});
}

Eigen::VectorXd load_identity_anchor_json(const std::string& path) {
    return vector_from_json(parse_json_file(path), "z_id", path);
}

void save_identity_anchor_json(const std::string& path, const Eigen::VectorXd& anchor) {
    write_json_file(path, json{{"z_id", vector_to_json(anchor)}});
}

void save_metrics_json(const std::string& path, const MetricsRecord& metrics) {
    json rot = json::array();
    for (int r = 0; r < 3; ++r)
        rot.push_back({metrics.aligned_transform.rotation(r, 0), metrics.aligned_transform.rotation(r, 1),
                       metrics.aligned_transform.rotation(r, 2)});
    json j{{"l1_mm", metrics.l1_mm},
           {"l2_mm", metrics.l2_mm},
           {"nc", metrics.nc},
           {"recall_2_5", metrics.recall_2_5},
           {"aligned_rotation", rot},
           {"aligned_translation",
            {metrics.aligned_transform.translation.x(), metrics.aligned_transform.translation.y(),
             metrics.aligned_transform.translation.z()}}};
    write_json_file(path, j);
}

MetricsRecord load_metrics_json(const std::string& path) {
    const json j = parse_json_file(path);
    MetricsRecord m;
    m.l1_mm = j.at("l1_mm").get<double>();
    m.l2_mm = j.at("l2_mm").get<double>();
    m.nc = j.at("nc").get<double>();
    m.recall_2_5 = j.at("recall_2_5").get<double>();
    if (j.contains("aligned_rotation")) {
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c)
                m.aligned_transform.rotation(r, c) = j.at("aligned_rotation").at(r).at(c).get<double>();
        for (int c = 0; c < 3; ++c)
            m.aligned_transform.translation[c] = j.at("aligned_translation").at(c).get<double>();
    }
    return m;
}

void append_metrics_csv(const std::string& path, const std::string& subject,
                        const std::string& split, const MetricsRecord& metrics) {
    const bool exists = [&] {
        std::ifstream probe(path);
        return probe.good() && probe.peek() != std::ifstream::traits_type::eof();
    }();
    std::ofstream out(path, std::ios::app);
    if (!out) fail(ErrorKind::IoFailure, "cannot open '" + path + "' for appending");
    if (!exists) out << "subject,split,l1_mm,l2_mm,nc,recall_2_5\n";
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%s,%s,%.6f,%.6f,%.6f,%.6f\n", subject.c_str(), split.c_str(),
                  metrics.l1_mm, metrics.l2_mm, metrics.nc, metrics.recall_2_5);
    out << buf;
}

void save_trace_csv(const std::string& path, const std::vector<double>& energy_trace) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) fail(ErrorKind::IoFailure, "cannot open '" + path + "' for writing");
    std::fprintf(f, "step,energy\n");
    for (std::size_t i = 0; i < energy_trace.size(); ++i)
        std::fprintf(f, "%zu,%.12g\n", i, energy_trace[i]);
    std::fclose(f);
}

void save_correspondences_csv(const std::string& path, const CorrespondenceSet& corr) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) fail(ErrorKind::IoFailure, "cannot open '" + path + "' for writing");
    std::fprintf(f, "vertex_id,px,py,uv_dist,accepted\n");
    for (int v = 0; v < corr.size(); ++v)
        std::fprintf(f, "%d,%.6f,%.6f,%.9g,%d\n", v, corr.target_pixels(v, 0), corr.target_pixels(v, 1),
                     corr.uv_distances[v], int(corr.accepted[v]));
    std::fclose(f);
}

} // namespace facefit::io
