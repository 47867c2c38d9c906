#include "pcv/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "pcv/rng.hpp"

namespace fs = std::filesystem;

namespace pcv {

namespace {

constexpr double kTau = 2.0 * std::numbers::pi;

std::string fmt_float(float v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, p);
}

float parse_float(const std::string& tok, const std::string& context) {
    float v;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || p != tok.data() + tok.size())
        throw std::runtime_error("non-numeric token '" + tok + "' " + context);
    return v;
}

}  // namespace

ShapeKind shape_kind_from_name(const std::string& name) {
    if (name == "sphere") return ShapeKind::Sphere;
    if (name == "cube") return ShapeKind::Cube;
    if (name == "cylinder") return ShapeKind::Cylinder;
    if (name == "cone") return ShapeKind::Cone;
    if (name == "torus") return ShapeKind::Torus;
    throw std::invalid_argument("unknown shape kind: " + name);
}

std::string shape_kind_name(ShapeKind kind) {
    switch (kind) {
        case ShapeKind::Sphere: return "sphere";
        case ShapeKind::Cube: return "cube";
        case ShapeKind::Cylinder: return "cylinder";
        case ShapeKind::Cone: return "cone";
        case ShapeKind::Torus: return "torus";
    }
    throw std::invalid_argument("unknown shape kind");
}

namespace {

std::array<double, 3> surface_point(ShapeKind kind, Rng& rng) {
    switch (kind) {
        case ShapeKind::Sphere: {
            double x, y, z, n2;
            do {
                x = rng.normal();
                y = rng.normal();
                z = rng.normal();
                n2 = x * x + y * y + z * z;
            } while (n2 < 1e-12);
            const double inv = 1.0 / std::sqrt(n2);
            return {x * inv, y * inv, z * inv};
        }
        case ShapeKind::Cube: {
            const int face = rng.uniform_int(0, 5);
            const double u = rng.uniform(-1.0, 1.0);
            const double v = rng.uniform(-1.0, 1.0);
            const double s = (face % 2 == 0) ? -1.0 : 1.0;
            switch (face / 2) {
                case 0: return {s, u, v};
                case 1: return {u, s, v};
                default: return {u, v, s};
            }
        }
        case ShapeKind::Cylinder: {
            // radius 1, height 2; lateral area 4*pi vs cap area 2*pi
            if (rng.uniform() < 2.0 / 3.0) {
                const double theta = rng.uniform(0.0, kTau);
                const double z = rng.uniform(-1.0, 1.0);
                return {std::cos(theta), std::sin(theta), z};
            }
            const double z = rng.uniform() < 0.5 ? -1.0 : 1.0;
            const double r = std::sqrt(rng.uniform());
            const double theta = rng.uniform(0.0, kTau);
            return {r * std::cos(theta), r * std::sin(theta), z};
        }
        case ShapeKind::Cone: {
            // apex (0,0,1), base disk radius 1 at z = -1
            const double lateral = std::numbers::pi * std::sqrt(5.0);
            const double base = std::numbers::pi;
            if (rng.uniform() < lateral / (lateral + base)) {
                const double t = std::sqrt(rng.uniform());  // area-uniform from apex
                const double theta = rng.uniform(0.0, kTau);
                return {t * std::cos(theta), t * std::sin(theta), 1.0 - 2.0 * t};
            }
            const double r = std::sqrt(rng.uniform());
            const double theta = rng.uniform(0.0, kTau);
            return {r * std::cos(theta), r * std::sin(theta), -1.0};
        }
        case ShapeKind::Torus: {
            // major radius 1, minor 0.35; rejection keeps the area uniform
            const double minor = 0.35;
            for (;;) {
                const double u = rng.uniform(0.0, kTau);
                const double v = rng.uniform(0.0, kTau);
                const double w = (1.0 + minor * std::cos(v)) / (1.0 + minor);
                if (rng.uniform() <= w) {
                    const double ring = 1.0 + minor * std::cos(v);
                    return {ring * std::cos(u), ring * std::sin(u), minor * std::sin(v)};
                }
            }
        }
    }
    throw std::invalid_argument("unknown shape kind");
}

}  // namespace

PointCloud sample_surface(ShapeKind kind, int n, std::uint64_t seed) {
    if (n < 8) throw std::invalid_argument("sample_surface: need n >= 8, got " + std::to_string(n));
    Rng rng(mix_seed(seed, 0));
    PointCloud cloud;
    cloud.points = Tensor::zeros({n, 3});
    for (int i = 0; i < n; ++i) {
        auto p = surface_point(kind, rng);
        for (int j = 0; j < 3; ++j) cloud.points.at(i, j) = static_cast<float>(p[j]);
    }
    cloud.label = static_cast<int>(kind);
    return cloud;
}

PointCloud generate_shape(ShapeKind kind, int n, double jitter, std::uint64_t seed) {
    if (jitter < 0) throw std::invalid_argument("generate_shape: jitter must be >= 0");
    PointCloud cloud = sample_surface(kind, n, seed);
    if (jitter > 0) {
        Rng rng(mix_seed(seed, 1));
        for (float& v : cloud.points.data) v += static_cast<float>(jitter * rng.normal());
    }
    return normalize_to_unit_cube(cloud);
}

Mesh parse_off(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path);

    struct Tok {
        std::string text;
        int line;
    };
    std::vector<Tok> toks;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        std::istringstream ls(line);
        std::string t;
        while (ls >> t) toks.push_back({t, lineno});
    }
    if (toks.empty()) throw std::runtime_error(path + ":1: empty OFF file");

    size_t pos = 0;
    auto fail = [&](const std::string& msg, int ln) -> void {
        throw std::runtime_error(path + ":" + std::to_string(ln) + ": " + msg);
    };
    auto next = [&](const std::string& what) -> Tok {
        if (pos >= toks.size()) fail("unexpected end of file while reading " + what, lineno);
        return toks[pos++];
    };
    auto next_int = [&](const std::string& what) -> int {
        const Tok t = next(what);
        int v;
        auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
        if (ec != std::errc() || p != t.text.data() + t.text.size())
            fail("non-numeric token '" + t.text + "' while reading " + what, t.line);
        return v;
    };
    auto next_float = [&](const std::string& what) -> float {
        const Tok t = next(what);
        float v;
        auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
        if (ec != std::errc() || p != t.text.data() + t.text.size())
            fail("non-numeric token '" + t.text + "' while reading " + what, t.line);
        return v;
    };

    // the header token may be fused with the vertex count ("OFF490")
    Tok head = next("header");
    if (head.text.rfind("OFF", 0) != 0) fail("file does not start with OFF", head.line);
    int nv;
    if (head.text == "OFF") {
        nv = next_int("vertex count");
    } else {
        const std::string rest = head.text.substr(3);
        auto [p, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), nv);
        if (ec != std::errc() || p != rest.data() + rest.size())
            fail("bad fused OFF header '" + head.text + "'", head.line);
    }
    const int nf = next_int("face count");
    next_int("edge count");
    if (nv < 0 || nf < 0) fail("negative counts in header", head.line);

    Mesh mesh;
    mesh.vertices.reserve(nv);
    for (int i = 0; i < nv; ++i) {
        std::array<float, 3> v;
        for (int j = 0; j < 3; ++j) v[j] = next_float("vertex " + std::to_string(i));
        mesh.vertices.push_back(v);
    }
    for (int i = 0; i < nf; ++i) {
        const Tok count_tok = toks[std::min(pos, toks.size() - 1)];
        const int m = next_int("face " + std::to_string(i) + " vertex count");
        if (m < 3) fail("face with fewer than 3 vertices", count_tok.line);
        std::vector<int> idx(m);
        for (int j = 0; j < m; ++j) {
            const Tok t = toks[std::min(pos, toks.size() - 1)];
            idx[j] = next_int("face index");
            if (idx[j] < 0 || idx[j] >= nv)
                fail("vertex index " + std::to_string(idx[j]) + " out of range [0," +
                         std::to_string(nv) + ")",
                     t.line);
        }
        for (int j = 1; j + 1 < m; ++j)  // fan triangulation
            mesh.faces.push_back({idx[0], idx[j], idx[j + 1]});
    }
    return mesh;
}

PointCloud sample_mesh_surface(const Mesh& mesh, int n, std::uint64_t seed) {
    std::vector<double> cum;
    cum.reserve(mesh.faces.size());
    double total = 0.0;
    for (const auto& f : mesh.faces) {
        const auto& a = mesh.vertices[f[0]];
        const auto& b = mesh.vertices[f[1]];
        const auto& c = mesh.vertices[f[2]];
        const double ux = b[0] - a[0], uy = b[1] - a[1], uz = b[2] - a[2];
        const double vx = c[0] - a[0], vy = c[1] - a[1], vz = c[2] - a[2];
        const double cx = uy * vz - uz * vy;
        const double cy = uz * vx - ux * vz;
        const double cz = ux * vy - uy * vx;
        total += 0.5 * std::sqrt(cx * cx + cy * cy + cz * cz);
        cum.push_back(total);
    }
    if (mesh.faces.empty() || total <= 0.0)
        throw std::domain_error("sample_mesh_surface: mesh has no positive-area faces");

    Rng rng(seed);
    PointCloud cloud;
    cloud.points = Tensor::zeros({n, 3});
    for (int i = 0; i < n; ++i) {
        const double r = rng.uniform() * total;
        const auto it = std::lower_bound(cum.begin(), cum.end(), r);
        const auto& f = mesh.faces[std::min<size_t>(it - cum.begin(), mesh.faces.size() - 1)];
        double u = rng.uniform(), v = rng.uniform();
        if (u + v > 1.0) {
            u = 1.0 - u;
            v = 1.0 - v;
        }
        const auto& a = mesh.vertices[f[0]];
        const auto& b = mesh.vertices[f[1]];
        const auto& c = mesh.vertices[f[2]];
        for (int j = 0; j < 3; ++j)
            cloud.points.at(i, j) =
                static_cast<float>(a[j] + u * (b[j] - a[j]) + v * (c[j] - a[j]));
    }
    return cloud;
}

PointCloud normalize_to_unit_cube(const PointCloud& cloud) {
    const int n = cloud.size();
    if (n < 1) throw std::domain_error("normalize: empty cloud");
    float lo[3], hi[3];
    for (int j = 0; j < 3; ++j) lo[j] = hi[j] = cloud.points.at(0, j);
    for (int i = 1; i < n; ++i)
        for (int j = 0; j < 3; ++j) {
            lo[j] = std::min(lo[j], cloud.points.at(i, j));
            hi[j] = std::max(hi[j], cloud.points.at(i, j));
        }
    float span = 0.0f;
    for (int j = 0; j < 3; ++j) span = std::max(span, hi[j] - lo[j]);
    if (span <= 0.0f) throw std::domain_error("normalize: all points identical");
    PointCloud out = cloud;
    const float inv = 1.0f / span;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < 3; ++j) {
            float v = (cloud.points.at(i, j) - lo[j]) * inv;
            out.points.at(i, j) = std::clamp(v, 0.0f, 1.0f);  // guard rounding
        }
    return out;
}

PointCloud resample(const PointCloud& cloud, int m, std::uint64_t seed) {
    const int n = cloud.size();
    if (n < 1) throw std::domain_error("resample: empty cloud");
    Rng rng(seed);
    std::vector<int> pick(m);
    if (n >= m) {
        std::vector<int> idx(n);
        for (int i = 0; i < n; ++i) idx[i] = i;
        for (int i = 0; i < m; ++i) {  // partial Fisher-Yates
            const int j = rng.uniform_int(i, n - 1);
            std::swap(idx[i], idx[j]);
            pick[i] = idx[i];
        }
    } else {
        for (int i = 0; i < m; ++i) pick[i] = rng.uniform_int(0, n - 1);
    }
    PointCloud out;
    out.label = cloud.label;
    out.id = cloud.id;
    out.points = Tensor::zeros({m, 3});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < 3; ++j) out.points.at(i, j) = cloud.points.at(pick[i], j);
    return out;
}

void save_cloud(const PointCloud& cloud, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os << "pcv-cloud 1 " << cloud.size() << " " << cloud.label << "\n";
    for (int i = 0; i < cloud.size(); ++i)
        os << fmt_float(cloud.points.at(i, 0)) << " " << fmt_float(cloud.points.at(i, 1)) << " "
           << fmt_float(cloud.points.at(i, 2)) << "\n";
    if (!os) throw std::runtime_error("write failed for " + path);
}

PointCloud load_cloud(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path);
    std::string magic;
    int version, n, label;
    if (!(is >> magic >> version >> n >> label) || magic != "pcv-cloud" || version != 1 || n < 1)
        throw std::runtime_error("bad cloud header in " + path);
    PointCloud cloud;
    cloud.label = label;
    cloud.id = fs::path(path).stem().string();
    cloud.points = Tensor::zeros({n, 3});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < 3; ++j) {
            std::string tok;
            if (!(is >> tok)) throw std::runtime_error("truncated cloud file " + path);
            cloud.points.at(i, j) = parse_float(tok, "in " + path);
        }
    return cloud;
}

void save_manifest(const DatasetManifest& m, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os << "pcv-manifest 1\n";
    os << "seed " << m.seed << "\n";
    os << "points " << m.num_points << "\n";
    os << "jitter " << fmt_float(static_cast<float>(m.jitter)) << "\n";
    os << "classes";
    for (const auto& c : m.class_names) os << " " << c;
    os << "\n";
    os << "files " << m.files.size() << "\n";
    for (const auto& f : m.files) os << f << "\n";
    if (!os) throw std::runtime_error("write failed for " + path);
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path);
    std::string magic;
    int version;
    if (!(is >> magic >> version) || magic != "pcv-manifest" || version != 1)
        throw std::runtime_error("bad manifest header in " + path);
    DatasetManifest m;
    std::string key;
    is >> key >> m.seed;
    is >> key >> m.num_points;
    std::string jit;
    is >> key >> jit;
    m.jitter = parse_float(jit, "in " + path);
    std::string line;
    std::getline(is, line);
    std::getline(is, line);  // classes line
    {
        std::istringstream ls(line);
        ls >> key;
        std::string c;
        while (ls >> c) m.class_names.push_back(c);
    }
    size_t count;
    is >> key >> count;
    std::getline(is, line);
    for (size_t i = 0; i < count; ++i) {
        if (!std::getline(is, line)) throw std::runtime_error("truncated manifest " + path);
        m.files.push_back(line);
    }
    for (size_t i = 0; i < m.files.size(); ++i)
        for (size_t j = i + 1; j < m.files.size(); ++j)
            if (m.files[i] == m.files[j])
                throw std::runtime_error("duplicate file in manifest: " + m.files[i]);
    return m;
}

std::pair<DatasetManifest, DatasetManifest> build_dataset(const DatasetConfig& config,
                                                          std::uint64_t seed,
                                                          const std::string& out_dir) {
    if (config.per_class < 1) throw std::invalid_argument("build_dataset: per_class must be >= 1");
    fs::create_directories(out_dir);
    DatasetManifest train, val;
    for (auto* m : {&train, &val}) {
        for (ShapeKind k : config.classes) m->class_names.push_back(shape_kind_name(k));
        m->seed = seed;
        m->num_points = config.num_points;
        m->jitter = config.jitter;
    }
    const int val_count = static_cast<int>(std::lround(config.per_class * config.val_fraction));
    std::uint64_t sample_idx = 0;
    for (size_t c = 0; c < config.classes.size(); ++c) {
        for (int i = 0; i < config.per_class; ++i, ++sample_idx) {
            PointCloud cloud = generate_shape(config.classes[c], config.num_points, config.jitter,
                                              mix_seed(seed, sample_idx));
            cloud.label = static_cast<int>(c);
            cloud.id = shape_kind_name(config.classes[c]) + "_" + std::to_string(i);
            const std::string fname = cloud.id + ".cloud";
            save_cloud(cloud, (fs::path(out_dir) / fname).string());
            (i >= config.per_class - val_count ? val : train).files.push_back(fname);
        }
    }
    save_manifest(train, (fs::path(out_dir) / "train.manifest").string());
    save_manifest(val, (fs::path(out_dir) / "val.manifest").string());
    return {train, val};
}

std::vector<PointCloud> load_split(const DatasetManifest& m, const std::string& dir) {
    std::vector<PointCloud> out;
    out.reserve(m.files.size());
    for (const auto& f : m.files) out.push_back(load_cloud((fs::path(dir) / f).string()));
    return out;
}

}  // namespace pcv
