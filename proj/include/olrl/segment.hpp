#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "olrl/core.hpp"
#include "olrl/env.hpp"

namespace olrl {

// One component of a frame partition.
struct SegmentMask {
    BitMask mask;
    int pixel_count = 0;
    Vec2 median;    // coordinate-wise lower median, pixel units
    Vec2 centroid;  // mean position, pixel units

    std::vector<Vec2i> point_cloud() const { return mask.pixels(); }
};

inline SegmentMask make_segment_mask(BitMask mask) {
    SegmentMask s;
    s.pixel_count = mask.count();
    if (s.pixel_count == 0) throw UsageError("empty segment mask");
    s.median = mask.median();
    s.centroid = mask.centroid();
    s.mask = std::move(mask);
    return s;
}

namespace detail {

class UnionFind {
  public:
    explicit UnionFind(int n) : parent_(size_t(n)), size_(size_t(n), 1) {
        std::iota(parent_.begin(), parent_.end(), 0);
    }

    int find(int x) {
        int root = x;
        while (parent_[size_t(root)] != root) root = parent_[size_t(root)];
        while (parent_[size_t(x)] != root) {
            int next = parent_[size_t(x)];
            parent_[size_t(x)] = root;
            x = next;
        }
        return root;
    }

    int unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return a;
        if (size_[size_t(a)] < size_[size_t(b)]) std::swap(a, b);
        parent_[size_t(b)] = a;
        size_[size_t(a)] += size_[size_t(b)];
        return a;
    }

    int size(int root) { return size_[size_t(find(root))]; }

  private:
    std::vector<int> parent_;
    std::vector<int> size_;
};

struct GraphEdge {
    float w;
    int a;
    int b;
};

// RGBD distance with depth scaled onto the color range.
inline float rgbd_edge_weight(const Frame& f, int ax, int ay, int bx, int by) {
    double s = 0.0;
    for (int c = 0; c < 3; ++c) s += sqr(double(f.at(ax, ay, c)) - double(f.at(bx, by, c)));
    s += sqr(255.0 * (double(f.at(ax, ay, 3)) - double(f.at(bx, by, 3))));
    return float(std::sqrt(s));
}

inline Frame gaussian_blur(const Frame& f, double sigma) {
    int radius = std::max(1, int(std::ceil(3.0 * sigma)));
    std::vector<double> kernel(size_t(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[size_t(i + radius)] = std::exp(-0.5 * sqr(i / sigma));
        sum += kernel[size_t(i + radius)];
    }
    for (double& k : kernel) k /= sum;

    Frame tmp(f.h, f.w), out(f.h, f.w);
    auto clampi = [](int v, int hi) { return std::clamp(v, 0, hi - 1); };
    for (int y = 0; y < f.h; ++y) {
        for (int x = 0; x < f.w; ++x) {
            for (int c = 0; c < 4; ++c) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i)
                    acc += kernel[size_t(i + radius)] * f.at(clampi(x + i, f.w), y, c);
                tmp.at(x, y, c) = float(acc);
            }
        }
    }
    for (int y = 0; y < f.h; ++y) {
        for (int x = 0; x < f.w; ++x) {
            for (int c = 0; c < 4; ++c) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i)
                    acc += kernel[size_t(i + radius)] * tmp.at(x, clampi(y + i, f.h), c);
                out.at(x, y, c) = float(acc);
            }
        }
    }
    return out;
}

}  // namespace detail

// Graph-based segmentation (Felzenszwalb-Huttenlocher) over the 8-connected
// pixel grid with threshold function tau(C) = scale / |C|, followed by a
// pass merging components below min_size into their lowest-weight neighbor.
// The result is a partition of the frame; segments are ordered by their
// smallest flattened pixel index.
inline std::vector<SegmentMask> segment(const Frame& frame, double scale, double sigma,
                                        int min_size) {
    if (scale <= 0.0) throw ConfigError("segmentation scale must be > 0");
    if (sigma < 0.0) throw ConfigError("segmentation sigma must be >= 0");
    const Frame& f = sigma > 0.0 ? detail::gaussian_blur(frame, sigma) : frame;
    const int h = f.h, w = f.w;
    const int n = h * w;

    std::vector<detail::GraphEdge> edges;
    edges.reserve(size_t(n) * 4);
    auto idx = [w](int x, int y) { return y * w + x; };
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (x + 1 < w)
                edges.push_back({detail::rgbd_edge_weight(f, x, y, x + 1, y), idx(x, y), idx(x + 1, y)});
            if (y + 1 < h)
                edges.push_back({detail::rgbd_edge_weight(f, x, y, x, y + 1), idx(x, y), idx(x, y + 1)});
            if (x + 1 < w && y + 1 < h)
                edges.push_back(
                    {detail::rgbd_edge_weight(f, x, y, x + 1, y + 1), idx(x, y), idx(x + 1, y + 1)});
            if (x > 0 && y + 1 < h)
                edges.push_back(
                    {detail::rgbd_edge_weight(f, x, y, x - 1, y + 1), idx(x, y), idx(x - 1, y + 1)});
        }
    }
    std::sort(edges.begin(), edges.end(), [](const detail::GraphEdge& a, const detail::GraphEdge& b) {
        if (a.w != b.w) return a.w < b.w;
        if (a.a != b.a) return a.a < b.a;
        return a.b < b.b;
    });

    detail::UnionFind uf(n);
    std::vector<double> threshold(size_t(n), scale);
    for (const detail::GraphEdge& e : edges) {
        int ra = uf.find(e.a), rb = uf.find(e.b);
        if (ra == rb) continue;
        if (e.w <= threshold[size_t(ra)] && e.w <= threshold[size_t(rb)]) {
            int r = uf.unite(ra, rb);
            threshold[size_t(r)] = e.w + scale / uf.size(r);
        }
    }
    if (min_size > 1) {
        for (const detail::GraphEdge& e : edges) {
            int ra = uf.find(e.a), rb = uf.find(e.b);
            if (ra == rb) continue;
            if (uf.size(ra) < min_size || uf.size(rb) < min_size) uf.unite(ra, rb);
        }
    }

    // Collect components in order of first appearance (smallest pixel index).
    std::vector<int> comp_of_root(size_t(n), -1);
    std::vector<BitMask> masks;
    for (int i = 0; i < n; ++i) {
        int r = uf.find(i);
        int& c = comp_of_root[size_t(r)];
        if (c < 0) {
            c = int(masks.size());
            masks.emplace_back(h, w);
        }
        masks[size_t(c)].set(i % w, i / w);
    }
    std::vector<SegmentMask> out;
    out.reserve(masks.size());
    for (BitMask& m : masks) out.push_back(make_segment_mask(std::move(m)));
    return out;
}

}  // namespace olrl
