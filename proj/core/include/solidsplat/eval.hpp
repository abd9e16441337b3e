// Copyright Contributors to the solidsplat Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "solidsplat/camera.hpp"
#include "solidsplat/image.hpp"

#include <span>
#include <vector>

namespace solidsplat {

/// Per-pixel cycle reprojection error of a reference view against a neighbour.
struct ConsistencyReport {
    Image<double> error;
    Mask mask;
    std::size_t valid_pixels = 0;
    /// valid_pixels over the number of valid reference pixels.
    double valid_fraction = 0.0;
    double mean_error = 0.0;
    double median_error = 0.0;
};

/// Back-projects each valid reference pixel, projects it into the neighbour,
/// samples the neighbour depth bilinearly, back-projects that sample and
/// reprojects into the reference. Samples touching a masked neighbour pixel
/// or landing outside the neighbour image are invalid.
ConsistencyReport cycle_reprojection_map(const DepthMap &depth_ref, const Camera &cam_ref,
                                         const DepthMap &depth_nbr, const Camera &cam_nbr);

struct DepthView {
    DepthMap depth;
    Camera camera;
};

struct FuseOptions {
    /// Edge length of the averaging voxel grid; 0 keeps every point.
    double voxel_size = 0.0;
};

std::vector<Vec3> fuse_depths(std::span<const DepthView> views, const FuseOptions &options = {});

/// Static 3D k-d tree for nearest-neighbour queries.
class KdTree {
public:
    explicit KdTree(std::span<const Vec3> points);

    std::size_t size() const noexcept { return points_.size(); }
    /// Distance to the nearest stored point. Throws on an empty tree.
    double nearest_distance(const Vec3 &query) const;

private:
    struct Node {
        std::size_t begin, end;
        int axis;
        double split = 0.0;
        int left = -1, right = -1;
    };

    int build(std::size_t begin, std::size_t end);
    void search(int node, const Vec3 &q, double &best) const;

    std::vector<Vec3> points_;
    std::vector<Node> nodes_;
};

/// Symmetric mean of unsquared nearest-neighbour distances.
double chamfer(std::span<const Vec3> a, std::span<const Vec3> b);

} // namespace solidsplat
