#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "olrl/core.hpp"

namespace olrl {

// Depth budget used across learners: max(2, min(6, floor(rows / 50))).
inline int depth_for_rows(int rows) { return std::max(2, std::min(6, rows / 50)); }

// Row-major feature matrix plus targets. For classifiers, y holds class
// indices as doubles.
struct Dataset {
    int n_features = 0;
    std::vector<double> x;
    std::vector<double> y;

    explicit Dataset(int features = 0) : n_features(features) {}

    int rows() const { return int(y.size()); }

    void add_row(std::span<const double> feats, double target) {
        if (int(feats.size()) != n_features) throw UsageError("feature width mismatch");
        x.insert(x.end(), feats.begin(), feats.end());
        y.push_back(target);
    }

    const double* row(int i) const { return x.data() + size_t(i) * size_t(n_features); }
};

// Single axis-aligned CART tree. Classifier leaves hold Laplace-smoothed
// categorical distributions over the full class set; regressor leaves hold
// means. Splits are chosen greedily (information gain / variance reduction)
// with deterministic tie-breaking by (feature, threshold).
class DecisionTree {
  public:
    struct Node {
        int feature = -1;  // -1 marks a leaf
        double threshold = 0.0;
        int left = -1;
        int right = -1;
        double value = 0.0;        // regressor payload
        std::vector<double> dist;  // classifier payload

        bool is_leaf() const { return feature < 0; }
    };

    DecisionTree() = default;

    static DecisionTree fit_classifier(const Dataset& data, int n_classes, int max_depth,
                                       int min_leaf = 5, double alpha = 1.0) {
        if (n_classes < 2) throw UsageError("classifier needs >= 2 classes");
        if (data.rows() < 1) throw UsageError("cannot fit on empty dataset");
        DecisionTree t;
        t.n_classes_ = n_classes;
        t.n_features_ = data.n_features;
        t.alpha_ = alpha;
        std::vector<int> idx(size_t(data.rows()));
        std::iota(idx.begin(), idx.end(), 0);
        t.build(data, idx, 0, std::max(0, max_depth), std::max(1, min_leaf));
        return t;
    }

    static DecisionTree fit_regressor(const Dataset& data, int max_depth, int min_leaf = 5) {
        if (data.rows() < 1) throw UsageError("cannot fit on empty dataset");
        DecisionTree t;
        t.n_classes_ = 0;
        t.n_features_ = data.n_features;
        std::vector<int> idx(size_t(data.rows()));
        std::iota(idx.begin(), idx.end(), 0);
        t.build(data, idx, 0, std::max(0, max_depth), std::max(1, min_leaf));
        return t;
    }

    bool is_classifier() const { return n_classes_ > 0; }
    int n_classes() const { return n_classes_; }
    int n_features() const { return n_features_; }
    const std::vector<Node>& nodes() const { return nodes_; }

    const std::vector<double>& predict_dist(std::span<const double> feats) const {
        if (!is_classifier()) throw UsageError("predict_dist on a regressor");
        return nodes_[size_t(walk(feats))].dist;
    }

    double predict(std::span<const double> feats) const {
        if (is_classifier()) throw UsageError("predict on a classifier");
        return nodes_[size_t(walk(feats))].value;
    }

    int depth() const { return depth_below(0); }

    static DecisionTree from_parts(std::vector<Node> nodes, int n_classes, int n_features) {
        DecisionTree t;
        t.nodes_ = std::move(nodes);
        t.n_classes_ = n_classes;
        t.n_features_ = n_features;
        if (t.nodes_.empty()) throw IoError("decision tree with no nodes");
        for (const Node& n : t.nodes_) {
            if (n.is_leaf()) {
                if (n_classes > 0 && int(n.dist.size()) != n_classes)
                    throw IoError("leaf distribution width mismatch");
            } else if (n.left < 0 || n.right < 0 || n.left >= int(t.nodes_.size()) ||
                       n.right >= int(t.nodes_.size()) || n.feature >= n_features) {
                throw IoError("malformed decision tree node");
            }
        }
        return t;
    }

  private:
    int walk(std::span<const double> feats) const {
        if (int(feats.size()) != n_features_) throw UsageError("feature width mismatch");
        int at = 0;
        while (!nodes_[size_t(at)].is_leaf()) {
            const Node& n = nodes_[size_t(at)];
            at = feats[size_t(n.feature)] < n.threshold ? n.left : n.right;
        }
        return at;
    }

    int depth_below(int at) const {
        const Node& n = nodes_[size_t(at)];
        if (n.is_leaf()) return 0;
        return 1 + std::max(depth_below(n.left), depth_below(n.right));
    }

    int make_leaf(const Dataset& data, const std::vector<int>& idx) {
        Node leaf;
        if (is_classifier()) {
            std::vector<double> counts(size_t(n_classes_), 0.0);
            for (int i : idx) counts[size_t(int(data.y[size_t(i)]))] += 1.0;
            double denom = double(idx.size()) + alpha_ * n_classes_;
            leaf.dist.resize(size_t(n_classes_));
            for (int c = 0; c < n_classes_; ++c)
                leaf.dist[size_t(c)] = (counts[size_t(c)] + alpha_) / denom;
        } else {
            double sum = 0.0;
            for (int i : idx) sum += data.y[size_t(i)];
            leaf.value = sum / double(idx.size());
        }
        nodes_.push_back(std::move(leaf));
        return int(nodes_.size()) - 1;
    }

    struct Split {
        bool found = false;
        double gain = 0.0;
        int feature = -1;
        double threshold = 0.0;
    };

    static double entropy(const std::vector<double>& counts, double n) {
        double h = 0.0;
        for (double c : counts) {
            if (c <= 0.0) continue;
            double p = c / n;
            h -= p * std::log(p);
        }
        return h;
    }

    Split best_split(const Dataset& data, const std::vector<int>& idx, int min_leaf) const {
        const int n = int(idx.size());
        Split best;
        std::vector<int> order(idx);
        for (int f = 0; f < n_features_; ++f) {
            std::sort(order.begin(), order.end(), [&](int a, int b) {
                double va = data.row(a)[f], vb = data.row(b)[f];
                if (va != vb) return va < vb;
                return a < b;
            });
            if (is_classifier()) {
                std::vector<double> left(size_t(n_classes_), 0.0), total(size_t(n_classes_), 0.0);
                for (int i : order) total[size_t(int(data.y[size_t(i)]))] += 1.0;
                double h_parent = entropy(total, double(n));
                std::vector<double> right = total;
                for (int k = 1; k < n; ++k) {
                    int moved = order[size_t(k - 1)];
                    left[size_t(int(data.y[size_t(moved)]))] += 1.0;
                    right[size_t(int(data.y[size_t(moved)]))] -= 1.0;
                    double prev = data.row(order[size_t(k - 1)])[f];
                    double next = data.row(order[size_t(k)])[f];
                    if (prev == next) continue;
                    if (k < min_leaf || n - k < min_leaf) continue;
                    double h = (double(k) / n) * entropy(left, double(k)) +
                               (double(n - k) / n) * entropy(right, double(n - k));
                    consider(best, h_parent - h, f, (prev + next) / 2.0);
                }
            } else {
                double sum = 0.0, sumsq = 0.0;
                for (int i : order) {
                    sum += data.y[size_t(i)];
                    sumsq += sqr(data.y[size_t(i)]);
                }
                double sse_parent = sumsq - sqr(sum) / n;
                double lsum = 0.0, lsumsq = 0.0;
                for (int k = 1; k < n; ++k) {
                    double yv = data.y[size_t(order[size_t(k - 1)])];
                    lsum += yv;
                    lsumsq += sqr(yv);
                    double prev = data.row(order[size_t(k - 1)])[f];
                    double next = data.row(order[size_t(k)])[f];
                    if (prev == next) continue;
                    if (k < min_leaf || n - k < min_leaf) continue;
                    double rsum = sum - lsum, rsumsq = sumsq - lsumsq;
                    double sse = (lsumsq - sqr(lsum) / k) + (rsumsq - sqr(rsum) / (n - k));
                    consider(best, sse_parent - sse, f, (prev + next) / 2.0);
                }
            }
        }
        return best;
    }

    static void consider(Split& best, double gain, int feature, double threshold) {
        if (gain <= 1e-12) return;
        if (!best.found || gain > best.gain + 1e-12) {
            best = {true, gain, feature, threshold};
        }
        // Equal gains keep the earlier (lower feature, lower threshold) split
        // because candidates are enumerated in that order.
    }

    int build(const Dataset& data, const std::vector<int>& idx, int depth, int max_depth,
              int min_leaf) {
        bool pure = true;
        for (size_t i = 1; i < idx.size(); ++i) {
            if (data.y[size_t(idx[i])] != data.y[size_t(idx[0])]) {
                pure = false;
                break;
            }
        }
        if (depth >= max_depth || int(idx.size()) < 2 * min_leaf || pure)
            return make_leaf(data, idx);
        Split s = best_split(data, idx, min_leaf);
        if (!s.found) return make_leaf(data, idx);

        std::vector<int> left, right;
        for (int i : idx) {
            (data.row(i)[s.feature] < s.threshold ? left : right).push_back(i);
        }
        int node_at = int(nodes_.size());
        nodes_.emplace_back();
        nodes_[size_t(node_at)].feature = s.feature;
        nodes_[size_t(node_at)].threshold = s.threshold;
        int l = build(data, left, depth + 1, max_depth, min_leaf);
        int r = build(data, right, depth + 1, max_depth, min_leaf);
        nodes_[size_t(node_at)].left = l;
        nodes_[size_t(node_at)].right = r;
        return node_at;
    }

    std::vector<Node> nodes_;
    int n_classes_ = 0;
    int n_features_ = 0;
    double alpha_ = 1.0;
};

}  // namespace olrl
