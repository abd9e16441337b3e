// Copyright Contributors to the solidsplat Project
// SPDX-License-Identifier: Apache-2.0
#include "solidsplat/eval.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <tuple>

namespace solidsplat {

namespace {

std::optional<double> sample_depth(const DepthMap &d, const Vec2 &uv) {
    const int w = d.depth.width();
    const int h = d.depth.height();
    if (!(uv.x() >= 0.0 && uv.y() >= 0.0 && uv.x() <= w - 1.0 && uv.y() <= h - 1.0)) {
        return std::nullopt;
    }
    const int x0 = std::min(static_cast<int>(std::floor(uv.x())), std::max(w - 2, 0));
    const int y0 = std::min(static_cast<int>(std::floor(uv.y())), std::max(h - 2, 0));
    const int x1 = std::min(x0 + 1, w - 1);
    const int y1 = std::min(y0 + 1, h - 1);
    if (!d.mask(x0, y0) || !d.mask(x1, y0) || !d.mask(x0, y1) || !d.mask(x1, y1)) {
        return std::nullopt;
    }
    const double fx = uv.x() - x0;
    const double fy = uv.y() - y0;
    const double top = d.depth(x0, y0) * (1.0 - fx) + d.depth(x1, y0) * fx;
    const double bottom = d.depth(x0, y1) * (1.0 - fx) + d.depth(x1, y1) * fx;
    return top * (1.0 - fy) + bottom * fy;
}

void check_dims(const DepthMap &d, const Camera &c) {
    if (d.depth.width() != c.width || d.depth.height() != c.height ||
        d.mask.width() != c.width || d.mask.height() != c.height) {
        throw ValidationError("depth map and camera dimensions differ");
    }
}

} // namespace

ConsistencyReport cycle_reprojection_map(const DepthMap &depth_ref, const Camera &cam_ref,
                                         const DepthMap &depth_nbr, const Camera &cam_nbr) {
    check_dims(depth_ref, cam_ref);
    check_dims(depth_nbr, cam_nbr);
    const int w = cam_ref.width;
    const int h = cam_ref.height;
    ConsistencyReport report{Image<double>(w, h, 0.0), Mask(w, h, 0)};
    std::vector<double> errors;
    std::size_t ref_valid = 0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!depth_ref.mask(x, y)) continue;
            ++ref_valid;
            const Vec3 world = cam_ref.pixel_ray(x, y).at(depth_ref.depth(x, y));
            const auto un = cam_nbr.project(world);
            if (!un) continue;
            const auto tn = sample_depth(depth_nbr, *un);
            if (!tn) continue;
            const Vec3 back = cam_nbr.pixel_ray(un->x(), un->y()).at(*tn);
            const auto ur = cam_ref.project(back);
            if (!ur) continue;
            const double e = (*ur - Vec2(x, y)).norm();
            if (!std::isfinite(e)) continue;
            report.error(x, y) = e;
            report.mask(x, y) = 1;
            errors.push_back(e);
        }
    }
    report.valid_pixels = errors.size();
    if (errors.empty()) return report;
    report.valid_fraction = static_cast<double>(errors.size()) / static_cast<double>(ref_valid);
    report.mean_error =
        std::accumulate(errors.begin(), errors.end(), 0.0) / static_cast<double>(errors.size());
    std::sort(errors.begin(), errors.end());
    const std::size_t n = errors.size();
    report.median_error = n % 2 ? errors[n / 2] : 0.5 * (errors[n / 2 - 1] + errors[n / 2]);
    return report;
}

std::vector<Vec3> fuse_depths(std::span<const DepthView> views, const FuseOptions &options) {
    if (!(options.voxel_size >= 0.0)) throw ValidationError("voxel size must be non-negative");
    std::vector<Vec3> points;
    for (const auto &v : views) {
        check_dims(v.depth, v.camera);
        for (int y = 0; y < v.camera.height; ++y) {
            for (int x = 0; x < v.camera.width; ++x) {
                if (!v.depth.mask(x, y)) continue;
                points.push_back(v.camera.pixel_ray(x, y).at(v.depth.depth(x, y)));
            }
        }
    }
    if (options.voxel_size == 0.0) return points;

    using Key = std::tuple<long long, long long, long long>;
    std::map<Key, std::pair<Vec3, std::size_t>> cells;
    for (const auto &p : points) {
        const Key key{static_cast<long long>(std::floor(p.x() / options.voxel_size)),
                      static_cast<long long>(std::floor(p.y() / options.voxel_size)),
                      static_cast<long long>(std::floor(p.z() / options.voxel_size))};
        auto [it, inserted] = cells.try_emplace(key, Vec3::Zero(), 0);
        it->second.first += p;
        ++it->second.second;
    }
    std::vector<Vec3> out;
    out.reserve(cells.size());
    for (const auto &[key, cell] : cells) out.push_back(cell.first / static_cast<double>(cell.second));
    return out;
}

KdTree::KdTree(std::span<const Vec3> points) : points_(points.begin(), points.end()) {
    if (!points_.empty()) {
        nodes_.reserve(2 * points_.size() / 8 + 1);
        build(0, points_.size());
    }
}

int KdTree::build(std::size_t begin, std::size_t end) {
    constexpr std::size_t kLeafSize = 8;
    Vec3 lo = points_[begin], hi = points_[begin];
    for (std::size_t i = begin; i < end; ++i) {
        lo = lo.cwiseMin(points_[i]);
        hi = hi.cwiseMax(points_[i]);
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back({begin, end, axis});
    if (end - begin <= kLeafSize) return id;
    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(points_.begin() + begin, points_.begin() + mid, points_.begin() + end,
                     [axis](const Vec3 &a, const Vec3 &b) { return a[axis] < b[axis]; });
    nodes_[id].split = points_[mid][axis];
    const int left = build(begin, mid);
    const int right = build(mid, end);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
}

void KdTree::search(int id, const Vec3 &q, double &best) const {
    const Node &n = nodes_[id];
    if (n.left < 0) {
        for (std::size_t i = n.begin; i < n.end; ++i) best = std::min(best, (points_[i] - q).squaredNorm());
        return;
    }
    const double diff = q[n.axis] - n.split;
    const int near = diff < 0.0 ? n.left : n.right;
    const int far = diff < 0.0 ? n.right : n.left;
    search(near, q, best);
    if (diff * diff < best) search(far, q, best);
}

double KdTree::nearest_distance(const Vec3 &query) const {
    if (points_.empty()) throw ValidationError("nearest-neighbour query on an empty cloud");
    double best = std::numeric_limits<double>::infinity();
    search(0, query, best);
    return std::sqrt(best);
}

double chamfer(std::span<const Vec3> a, std::span<const Vec3> b) {
    if (a.empty() || b.empty()) throw ValidationError("chamfer: empty point cloud");
    const KdTree ta(a);
    const KdTree tb(b);
    double sa = 0.0, sb = 0.0;
    for (const auto &p : a) sa += tb.nearest_distance(p);
    for (const auto &p : b) sb += ta.nearest_distance(p);
    return 0.5 * sa / static_cast<double>(a.size()) + 0.5 * sb / static_cast<double>(b.size());
}

} // namespace solidsplat
