#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <initializer_list>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace olrl {

// Invalid configuration supplied by the caller (bad JSON values, impossible
// geometry, ...). Mapped to exit code 2 by the CLI.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Filesystem / parse failures. Mapped to exit code 3 by the CLI.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Programming-contract violations (stepping a finished episode, mismatched
// track counts, ...).
struct UsageError : std::logic_error {
    using std::logic_error::logic_error;
};

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Folds several values into one seed. Order matters.
inline uint64_t mix_seed(std::initializer_list<uint64_t> parts) {
    uint64_t h = 0x243f6a8885a308d3ull;
    for (uint64_t p : parts) h = splitmix64(h ^ splitmix64(p));
    return h;
}

// Deterministic RNG used everywhere. All draws go through hand-rolled
// transformations of raw 64-bit outputs so streams are stable across
// standard-library implementations.
class Rng {
  public:
    explicit Rng(uint64_t seed) : eng_(splitmix64(seed)) {}

    uint64_t next_u64() { return eng_(); }

    // Uniform in [0, 1).
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). Requires n > 0.
    int uniform_int(int n) {
        if (n <= 0) throw UsageError("uniform_int: n must be positive");
        uint64_t un = uint64_t(n);
        // Rejection to avoid modulo bias.
        uint64_t lim = UINT64_MAX - UINT64_MAX % un;
        uint64_t x;
        do {
            x = next_u64();
        } while (x >= lim);
        return int(x % un);
    }

    // Standard normal via Box-Muller (one value per call, cached pair).
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1, u2;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Derived independent stream.
    Rng split(uint64_t tag) { return Rng(mix_seed({next_u64(), tag})); }

    // Draws an index proportional to the (nonnegative) weights.
    int sample_categorical(const std::vector<double>& weights) {
        if (weights.empty()) throw UsageError("sample_categorical: empty distribution");
        double total = 0.0;
        for (double w : weights) total += w;
        if (!(total > 0.0)) throw UsageError("sample_categorical: zero-mass distribution");
        double u = uniform() * total;
        double acc = 0.0;
        for (size_t i = 0; i < weights.size(); ++i) {
            acc += weights[i];
            if (u < acc) return int(i);
        }
        return int(weights.size()) - 1;
    }

  private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2& operator+=(Vec2 o) {
        x += o.x;
        y += o.y;
        return *this;
    }
    bool operator==(const Vec2&) const = default;

    double norm() const { return std::hypot(x, y); }
};

struct Vec2i {
    int x = 0;
    int y = 0;
    Vec2i& operator+=(Vec2i o) {
        x += o.x;
        y += o.y;
        return *this;
    }
    bool operator==(const Vec2i&) const = default;
};

inline double sqr(double v) { return v * v; }

// Index of unordered pair (i, j), i < j < k, into a flat array of size
// k * (k - 1) / 2. Pairs are laid out (0,1), (0,2), ..., (0,k-1), (1,2), ...
inline int pair_index(int i, int j, int k) {
    if (i > j) std::swap(i, j);
    if (i < 0 || j >= k || i == j) throw UsageError("pair_index: bad pair");
    return i * (2 * k - i - 1) / 2 + (j - i - 1);
}

inline int num_pairs(int k) { return k * (k - 1) / 2; }

// Fixed-size 2-D bit grid. Row-major, 64-bit words per row with the last
// word's unused tail kept zero.
class BitMask {
  public:
    BitMask() = default;
    BitMask(int height, int width)
        : h_(height), w_(width), stride_((width + 63) / 64),
          bits_(size_t(height) * size_t((width + 63) / 64), 0) {}

    int height() const { return h_; }
    int width() const { return w_; }
    bool same_shape(const BitMask& o) const { return h_ == o.h_ && w_ == o.w_; }

    void set(int x, int y) { word(y, x / 64) |= 1ull << (x % 64); }
    void reset(int x, int y) { word(y, x / 64) &= ~(1ull << (x % 64)); }
    bool test(int x, int y) const { return (word(y, x / 64) >> (x % 64)) & 1; }

    int count() const {
        int n = 0;
        for (uint64_t w : bits_) n += std::popcount(w);
        return n;
    }
    bool empty() const {
        for (uint64_t w : bits_) {
            if (w) return false;
        }
        return true;
    }

    bool operator==(const BitMask& o) const {
        return h_ == o.h_ && w_ == o.w_ && bits_ == o.bits_;
    }

    BitMask& operator|=(const BitMask& o) {
        for (size_t i = 0; i < bits_.size(); ++i) bits_[i] |= o.bits_[i];
        return *this;
    }
    BitMask& operator&=(const BitMask& o) {
        for (size_t i = 0; i < bits_.size(); ++i) bits_[i] &= o.bits_[i];
        return *this;
    }

    bool intersects(const BitMask& o) const {
        for (size_t i = 0; i < bits_.size(); ++i) {
            if (bits_[i] & o.bits_[i]) return true;
        }
        return false;
    }

    // Translated copy; bits shifted outside the grid are dropped.
    BitMask shifted(int dx, int dy) const {
        BitMask out(h_, w_);
        for (int y = 0; y < h_; ++y) {
            int sy = y - dy;
            if (sy < 0 || sy >= h_) continue;
            shift_row_into(sy, dx, out, y);
        }
        return out;
    }

    // Chebyshev dilation by radius r (union over all |dx|<=r, |dy|<=r shifts).
    BitMask dilated(int r) const {
        if (r <= 0) return *this;
        BitMask horiz(h_, w_);
        for (int dx = -r; dx <= r; ++dx) {
            for (int y = 0; y < h_; ++y) shift_row_or_into(y, dx, horiz, y);
        }
        BitMask out(h_, w_);
        for (int dy = -r; dy <= r; ++dy) {
            for (int y = 0; y < h_; ++y) {
                int sy = y - dy;
                if (sy < 0 || sy >= h_) continue;
                for (int wIdx = 0; wIdx < stride_; ++wIdx)
                    out.word(y, wIdx) |= horiz.word(sy, wIdx);
            }
        }
        return out;
    }

    template <class F>
    void for_each(F&& f) const {
        for (int y = 0; y < h_; ++y) {
            for (int wIdx = 0; wIdx < stride_; ++wIdx) {
                uint64_t bitsw = word(y, wIdx);
                while (bitsw) {
                    int b = std::countr_zero(bitsw);
                    f(wIdx * 64 + b, y);
                    bitsw &= bitsw - 1;
                }
            }
        }
    }

    std::vector<Vec2i> pixels() const {
        std::vector<Vec2i> out;
        out.reserve(size_t(count()));
        for_each([&](int x, int y) { out.push_back({x, y}); });
        return out;
    }

    // Lower median of x and y coordinates (element at index (n-1)/2 of each
    // sorted coordinate list). Requires a non-empty mask.
    Vec2 median() const {
        int n = count();
        if (n == 0) throw UsageError("median of empty mask");
        int want = (n - 1) / 2;
        // y: walk rows accumulating counts.
        int acc = 0, my = 0;
        for (int y = 0; y < h_; ++y) {
            int rowc = 0;
            for (int wIdx = 0; wIdx < stride_; ++wIdx) rowc += std::popcount(word(y, wIdx));
            if (acc + rowc > want) {
                my = y;
                break;
            }
            acc += rowc;
        }
        // x: per-column counts.
        std::vector<int> col(size_t(w_), 0);
        for_each([&](int x, int) { col[size_t(x)]++; });
        acc = 0;
        int mx = 0;
        for (int x = 0; x < w_; ++x) {
            if (acc + col[size_t(x)] > want) {
                mx = x;
                break;
            }
            acc += col[size_t(x)];
        }
        return {double(mx), double(my)};
    }

    Vec2 centroid() const {
        int n = count();
        if (n == 0) throw UsageError("centroid of empty mask");
        double sx = 0.0, sy = 0.0;
        for_each([&](int x, int y) {
            sx += x;
            sy += y;
        });
        return {sx / n, sy / n};
    }

    // Run-length encoding over the flattened row-major index, as
    // (start, length) pairs in increasing start order.
    std::vector<std::pair<int, int>> runs() const {
        std::vector<std::pair<int, int>> out;
        int start = -1, prev = -2;
        for_each([&](int x, int y) {
            int idx = y * w_ + x;
            if (idx == prev + 1) {
                prev = idx;
            } else {
                if (start >= 0) out.emplace_back(start, prev - start + 1);
                start = idx;
                prev = idx;
            }
        });
        if (start >= 0) out.emplace_back(start, prev - start + 1);
        return out;
    }

    static BitMask from_runs(int height, int width,
                             const std::vector<std::pair<int, int>>& runs) {
        BitMask out(height, width);
        for (auto [start, len] : runs) {
            if (start < 0 || len <= 0 || start + len > height * width)
                throw IoError("bitmask run out of range");
            for (int i = start; i < start + len; ++i) out.set(i % width, i / width);
        }
        return out;
    }

  private:
    uint64_t& word(int y, int wIdx) { return bits_[size_t(y) * stride_ + wIdx]; }
    uint64_t word(int y, int wIdx) const { return bits_[size_t(y) * stride_ + wIdx]; }

    void shift_row_into(int srcY, int dx, BitMask& out, int dstY) const {
        for (int wIdx = 0; wIdx < stride_; ++wIdx)
            out.word(dstY, wIdx) = shifted_word(srcY, wIdx, dx);
        out.mask_tail_row(dstY);
    }
    void shift_row_or_into(int srcY, int dx, BitMask& out, int dstY) const {
        for (int wIdx = 0; wIdx < stride_; ++wIdx)
            out.word(dstY, wIdx) |= shifted_word(srcY, wIdx, dx);
        out.mask_tail_row(dstY);
    }

    // Word wIdx of row srcY shifted horizontally by dx.
    uint64_t shifted_word(int srcY, int wIdx, int dx) const {
        int wordShift = dx >= 0 ? dx / 64 : -((-dx + 63) / 64);
        int bitShift = dx - wordShift * 64;  // 0..63
        uint64_t lo = fetch(srcY, wIdx - wordShift);
        if (bitShift == 0) return lo;
        uint64_t hi = fetch(srcY, wIdx - wordShift - 1);
        return (lo << bitShift) | (hi >> (64 - bitShift));
    }
    uint64_t fetch(int y, int wIdx) const {
        if (wIdx < 0 || wIdx >= stride_) return 0;
        return word(y, wIdx);
    }
    void mask_tail_row(int y) {
        int tail = w_ % 64;
        if (tail) word(y, stride_ - 1) &= (1ull << tail) - 1;
    }

    int h_ = 0;
    int w_ = 0;
    int stride_ = 0;
    std::vector<uint64_t> bits_;
};

// snprintf-based number formatting (std::format is unavailable on the
// reference toolchain).
inline std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), f, v);
    return buf;
}

// Shortest representation that round-trips a double exactly.
inline std::string fmt_exact(double v) {
    char buf[64];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) return buf;
    }
    return buf;
}

}  // namespace olrl
