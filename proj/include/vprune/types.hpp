#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace vprune {

using Vec3 = Eigen::Vector3d;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input text (bad SWC line, bad JSON field type).
class ParseError : public Error {
public:
    using Error::Error;
};

// Tree-level inconsistency: dangling parent, cycle, duplicate id.
class StructureError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class MissingInputError : public Error {
public:
    using Error::Error;
};

// NaN loss or other numerical breakdown; maps to CLI exit code 4.
class NumericalError : public Error {
public:
    using Error::Error;
};

struct GridDims {
    int nx = 0;
    int ny = 0;
    int nz = 0;

    std::int64_t count() const {
        return static_cast<std::int64_t>(nx) * ny * nz;
    }
    bool contains(int x, int y, int z) const {
        return x >= 0 && x < nx && y >= 0 && y < ny && z >= 0 && z < nz;
    }
    // x-fastest row-major linearization
    std::int64_t linear(int x, int y, int z) const {
        return static_cast<std::int64_t>(z) * ny * nx +
               static_cast<std::int64_t>(y) * nx + x;
    }
    std::array<int, 3> unlinear(std::int64_t i) const {
        const int x = static_cast<int>(i % nx);
        const int y = static_cast<int>((i / nx) % ny);
        const int z = static_cast<int>(i / (static_cast<std::int64_t>(nx) * ny));
        return {x, y, z};
    }
    bool operator==(const GridDims&) const = default;
};

// Cell-centered scalar grid. Voxel index (x,y,z) has its center at
// (x+0.5, y+0.5, z+0.5) * spacing in world millimetres.
struct ScalarVolume {
    GridDims dims;
    Vec3 spacing{1.0, 1.0, 1.0};
    std::vector<double> data;

    ScalarVolume() = default;
    ScalarVolume(GridDims d, const Vec3& s, double fill = 0.0)
        : dims(d), spacing(s), data(static_cast<std::size_t>(d.count()), fill) {
        if (d.nx <= 0 || d.ny <= 0 || d.nz <= 0)
            throw Error("ScalarVolume: non-positive dims");
        if (!(s.x() > 0.0 && s.y() > 0.0 && s.z() > 0.0))
            throw Error("ScalarVolume: non-positive spacing");
    }

    double& at(int x, int y, int z) { return data[static_cast<std::size_t>(dims.linear(x, y, z))]; }
    double at(int x, int y, int z) const { return data[static_cast<std::size_t>(dims.linear(x, y, z))]; }
    double& at(std::int64_t i) { return data[static_cast<std::size_t>(i)]; }
    double at(std::int64_t i) const { return data[static_cast<std::size_t>(i)]; }

    Vec3 voxel_center(int x, int y, int z) const {
        return Vec3((x + 0.5) * spacing.x(), (y + 0.5) * spacing.y(), (z + 0.5) * spacing.z());
    }
    Vec3 voxel_center(std::int64_t i) const {
        const auto v = dims.unlinear(i);
        return voxel_center(v[0], v[1], v[2]);
    }
    // Voxel whose cell contains world point p; may be out of bounds.
    std::array<int, 3> containing_voxel(const Vec3& p) const {
        return {static_cast<int>(std::floor(p.x() / spacing.x())),
                static_cast<int>(std::floor(p.y() / spacing.y())),
                static_cast<int>(std::floor(p.z() / spacing.z()))};
    }
    std::array<int, 3> clamped_voxel(const Vec3& p) const {
        auto v = containing_voxel(p);
        v[0] = std::min(std::max(v[0], 0), dims.nx - 1);
        v[1] = std::min(std::max(v[1], 0), dims.ny - 1);
        v[2] = std::min(std::max(v[2], 0), dims.nz - 1);
        return v;
    }
};

struct VesselNode {
    long long id = 0;
    int kind = 2;
    Vec3 pos{0.0, 0.0, 0.0};
    double radius = 1.0;
    long long parent = -1;  // -1 marks a root
};

// SWC-style node list; parent links must form a forest.
struct VesselTree {
    std::vector<VesselNode> nodes;

    bool empty() const { return nodes.empty(); }
    std::size_t size() const { return nodes.size(); }

    // Throws StructureError when ids/parent links violate the forest invariants.
    void validate() const;

    // Index of node with the given id, or -1.
    std::ptrdiff_t index_of(long long id) const;

    double total_length() const;

    // All parent-child edges as (child_pos, parent_pos) pairs.
    std::vector<std::pair<Vec3, Vec3>> edges() const;

    std::vector<std::size_t> root_indices() const;
};

struct FeatureStack {
    std::vector<ScalarVolume> layers;
    std::vector<std::string> channel_names;

    // Throws when layers disagree on dims or spacing.
    void validate() const;
};

}  // namespace vprune
