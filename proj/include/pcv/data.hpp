#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pcv/tensor.hpp"

namespace pcv {

struct PointCloud {
    Tensor points;  // n x 3, in [0,1] once normalized
    int label = 0;
    std::string id;
    int size() const { return points.shape[0]; }
};

enum class ShapeKind { Sphere, Cube, Cylinder, Cone, Torus };

ShapeKind shape_kind_from_name(const std::string& name);
std::string shape_kind_name(ShapeKind kind);

/// Raw surface samples, centered on the shape's canonical pose; no jitter,
/// no normalization.
PointCloud sample_surface(ShapeKind kind, int n, std::uint64_t seed);

/// sample_surface + Gaussian jitter + normalize_to_unit_cube.
PointCloud generate_shape(ShapeKind kind, int n, double jitter, std::uint64_t seed);

struct Mesh {
    std::vector<std::array<float, 3>> vertices;
    std::vector<std::array<int, 3>> faces;  // triangles
};

Mesh parse_off(const std::string& path);
PointCloud sample_mesh_surface(const Mesh& mesh, int n, std::uint64_t seed);

/// Uniform translate/scale into [0,1]^3; the widest axis spans exactly [0,1].
PointCloud normalize_to_unit_cube(const PointCloud& cloud);

PointCloud resample(const PointCloud& cloud, int m, std::uint64_t seed);

void save_cloud(const PointCloud& cloud, const std::string& path);
PointCloud load_cloud(const std::string& path);

struct DatasetConfig {
    std::vector<ShapeKind> classes = {ShapeKind::Sphere, ShapeKind::Cube, ShapeKind::Cylinder,
                                      ShapeKind::Cone, ShapeKind::Torus};
    int per_class = 125;       // total per class across both splits
    double val_fraction = 0.2;
    int num_points = 256;
    double jitter = 0.01;
};

struct DatasetManifest {
    std::vector<std::string> class_names;
    std::vector<std::string> files;  // relative to the manifest's directory
    std::uint64_t seed = 0;
    int num_points = 0;
    double jitter = 0.0;
};

void save_manifest(const DatasetManifest& m, const std::string& path);
DatasetManifest load_manifest(const std::string& path);

/// Generates clouds under out_dir and writes train.manifest / val.manifest.
/// Splits are stratified per class and disjoint.
std::pair<DatasetManifest, DatasetManifest> build_dataset(const DatasetConfig& config,
                                                          std::uint64_t seed,
                                                          const std::string& out_dir);

/// Loads every cloud listed by a manifest (paths resolved against dir).
std::vector<PointCloud> load_split(const DatasetManifest& m, const std::string& dir);

}  // namespace pcv
