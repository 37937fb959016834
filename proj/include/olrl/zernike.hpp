#pragma once

#include <array>
#include <cmath>

#include "olrl/core.hpp"
#include "olrl/segment.hpp"

namespace olrl {

inline constexpr int kZernikeCount = 25;

struct ZernikePair {
    int n;
    int m;
};

// All (n, m) with 0 <= n <= 8, 0 <= m <= n, n - m even.
inline constexpr std::array<ZernikePair, kZernikeCount> kZernikePairs = {{
    {0, 0},
    {1, 1},
    {2, 0}, {2, 2},
    {3, 1}, {3, 3},
    {4, 0}, {4, 2}, {4, 4},
    {5, 1}, {5, 3}, {5, 5},
    {6, 0}, {6, 2}, {6, 4}, {6, 6},
    {7, 1}, {7, 3}, {7, 5}, {7, 7},
    {8, 0}, {8, 2}, {8, 4}, {8, 6}, {8, 8},
}};

using ZernikeDescriptor = std::array<double, kZernikeCount>;

namespace detail {

struct RadialTerm {
    double coef;
    int power;
};

struct ZernikeTables {
    // radial[i] holds the polynomial terms of R_{n,m} for kZernikePairs[i].
    std::array<std::array<RadialTerm, 5>, kZernikeCount> radial{};
    std::array<int, kZernikeCount> n_terms{};

    ZernikeTables() {
        double fact[10];
        fact[0] = 1.0;
        for (int i = 1; i < 10; ++i) fact[i] = fact[i - 1] * i;
        for (int i = 0; i < kZernikeCount; ++i) {
            int n = kZernikePairs[size_t(i)].n;
            int m = kZernikePairs[size_t(i)].m;
            int terms = (n - m) / 2 + 1;
            n_terms[size_t(i)] = terms;
            for (int s = 0; s < terms; ++s) {
                double c = fact[n - s] /
                           (fact[s] * fact[(n + m) / 2 - s] * fact[(n - m) / 2 - s]);
                if (s % 2) c = -c;
                radial[size_t(i)][size_t(s)] = {c, n - 2 * s};
            }
        }
    }
};

inline const ZernikeTables& zernike_tables() {
    static const ZernikeTables tables;
    return tables;
}

}  // namespace detail

// Magnitudes |Z_nm| of the first 25 Zernike moments of the mask's indicator
// function, taken over the mask translated to its centroid and scaled to the
// unit disc by the bounding radius. Magnitudes are rotation-invariant up to
// raster error.
inline ZernikeDescriptor zernike_descriptor(const SegmentMask& seg) {
    if (seg.pixel_count < 1) throw UsageError("zernike_descriptor on empty mask");
    const auto& tables = detail::zernike_tables();
    const Vec2 c = seg.centroid;

    double rmax2 = 0.0;
    seg.mask.for_each([&](int x, int y) {
        rmax2 = std::max(rmax2, sqr(x - c.x) + sqr(y - c.y));
    });
    double rmax = std::max(std::sqrt(rmax2), 0.5);

    std::array<double, kZernikeCount> re{}, im{};
    seg.mask.for_each([&](int x, int y) {
        double dx = (x - c.x) / rmax;
        double dy = (y - c.y) / rmax;
        double rho = std::min(std::hypot(dx, dy), 1.0);
        double rho_pow[9];
        rho_pow[0] = 1.0;
        for (int p = 1; p <= 8; ++p) rho_pow[p] = rho_pow[p - 1] * rho;
        double cos1 = 1.0, sin1 = 0.0;
        if (rho > 0.0) {
            cos1 = dx / rho;
            sin1 = dy / rho;
        }
        // cos(m*theta), sin(m*theta) for m = 0..8 by recurrence.
        double cosm[9], sinm[9];
        cosm[0] = 1.0;
        sinm[0] = 0.0;
        for (int m = 1; m <= 8; ++m) {
            cosm[m] = cosm[m - 1] * cos1 - sinm[m - 1] * sin1;
            sinm[m] = sinm[m - 1] * cos1 + cosm[m - 1] * sin1;
        }
        for (int i = 0; i < kZernikeCount; ++i) {
            double r = 0.0;
            for (int s = 0; s < tables.n_terms[size_t(i)]; ++s) {
                const auto& term = tables.radial[size_t(i)][size_t(s)];
                r += term.coef * rho_pow[term.power];
            }
            int m = kZernikePairs[size_t(i)].m;
            re[size_t(i)] += r * cosm[m];
            im[size_t(i)] -= r * sinm[m];
        }
    });

    ZernikeDescriptor out{};
    const double pi = 3.14159265358979323846;
    for (int i = 0; i < kZernikeCount; ++i) {
        int n = kZernikePairs[size_t(i)].n;
        out[size_t(i)] =
            (n + 1) / pi * std::hypot(re[size_t(i)], im[size_t(i)]) / (rmax * rmax);
    }
    return out;
}

}  // namespace olrl
