#include "stefan/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "stefan/error.hpp"

namespace stefan {

TimeGrid build_time_grid(double T, int n) {
    if (!(T > 0.0) || !std::isfinite(T)) throw InvalidArgument("time horizon T must be positive");
    if (n < 2) throw InvalidArgument("time grid needs n >= 2 steps");
    TimeGrid g;
    g.n = n;
    g.T = T;
    g.tau = T / n;
    g.nodes.resize(static_cast<std::size_t>(n) + 1);
    for (int k = 0; k <= n; ++k) g.nodes[static_cast<std::size_t>(k)] = T * k / n;
    g.nodes.back() = T;
    return g;
}

int MovingGrid::cell_of(double x) const {
    const auto it = std::upper_bound(xs.begin(), xs.end(), x);
    const int idx = static_cast<int>(it - xs.begin()) - 1;
    return std::clamp(idx, 0, cells() - 1);
}

double MovingGrid::htau_ratio(double tau) const { return Delta / std::sqrt(tau); }

MovingGrid build_moving_grid(std::span<const double> s, double ell, double delta, int m0) {
    if (s.size() < 2) throw InvalidArgument("boundary vector needs at least 2 entries");
    if (m0 < 2) throw InvalidArgument("m0 must be at least 2");
    if (!(delta > 0.0)) throw InvalidArgument("delta must be positive");
    for (std::size_t k = 0; k < s.size(); ++k) {
        if (!std::isfinite(s[k])) throw InvalidArgument("boundary value is not finite");
        std::ostringstream msg;
        if (s[k] < delta) {
            msg << "boundary s_" << k << " = " << s[k] << " below delta = " << delta;
            throw ConstraintViolation(msg.str());
        }
        if (s[k] > ell) {
            msg << "boundary s_" << k << " = " << s[k] << " exceeds ell = " << ell;
            throw ConstraintViolation(msg.str());
        }
    }

    MovingGrid g;
    const int levels = static_cast<int>(s.size());
    g.perm.resize(s.size());
    std::iota(g.perm.begin(), g.perm.end(), 0);
    std::stable_sort(g.perm.begin(), g.perm.end(),
                     [&](int a, int b) { return s[static_cast<std::size_t>(a)] < s[static_cast<std::size_t>(b)]; });
    g.m.assign(s.size(), 0);

    const double s_min = s[static_cast<std::size_t>(g.perm[0])];
    g.h = s_min / m0;
    g.xs.reserve(static_cast<std::size_t>(m0) + s.size() + 16);
    for (int i = 0; i <= m0; ++i) g.xs.push_back(i * g.h);
    g.xs.back() = s_min;
    g.m[static_cast<std::size_t>(g.perm[0])] = m0;

    const double snap_width = kSnapFraction * ell;
    for (int j = 1; j < levels; ++j) {
        const int k = g.perm[static_cast<std::size_t>(j)];
        const double target = s[static_cast<std::size_t>(k)];
        const double last = g.xs.back();
        const double gap = target - last;
        if (gap > snap_width) {
            // Split gaps wider than the base step so every cell stays <= h.
            const int pieces = std::max(1, static_cast<int>(std::ceil(gap / g.h - 1e-9)));
            for (int p = 1; p < pieces; ++p) g.xs.push_back(last + gap * p / pieces);
            g.xs.push_back(target);
        } else if (gap > 0.0) {
            g.snaps.push_back({k, target, last});
        }
        g.m[static_cast<std::size_t>(k)] = static_cast<int>(g.xs.size()) - 1;
    }

    const double s_max = g.xs.back();
    const double tail = ell - s_max;
    if (tail > snap_width) {
        const int pieces = std::max(1, static_cast<int>(std::ceil(tail / g.h - 1e-9)));
        g.h_bar = tail / pieces;
        for (int p = 1; p < pieces; ++p) g.xs.push_back(s_max + tail * p / pieces);
        g.xs.push_back(ell);
    }

    g.hs.resize(g.xs.size() - 1);
    for (std::size_t i = 0; i + 1 < g.xs.size(); ++i) g.hs[i] = g.xs[i + 1] - g.xs[i];
    g.Delta = *std::max_element(g.hs.begin(), g.hs.end());
    return g;
}

int choose_m0(double s_min, double tau, const GridOptions& options) {
    if (!(options.htau_c > 0.0)) throw InvalidArgument("htau constant must be positive");
    switch (options.policy) {
        case M0Policy::Fixed:
            if (options.m0 < 2) throw InvalidArgument("fixed m0 must be at least 2");
            return options.m0;
        case M0Policy::SqrtTau:
            return std::max(2, static_cast<int>(std::ceil(s_min / (options.htau_c * std::sqrt(tau)) - 1e-9)));
        case M0Policy::Tau:
            return std::max(2, static_cast<int>(std::ceil(s_min / (options.htau_c * tau) - 1e-9)));
    }
    return 2;
}

MovingGrid build_moving_grid(std::span<const double> s, double ell, double delta, double tau,
                             const GridOptions& options) {
    if (s.empty()) throw InvalidArgument("empty boundary vector");
    const double s_min = *std::min_element(s.begin(), s.end());
    if (!(s_min >= delta)) {
        std::ostringstream msg;
        msg << "boundary value " << s_min << " below delta = " << delta;
        throw ConstraintViolation(msg.str());
    }
    return build_moving_grid(s, ell, delta, choose_m0(s_min, tau, options));
}

std::ranges::iota_view<int, int> segment_cells(const MovingGrid& grid, int k) {
    if (k < 0 || k >= grid.levels())
        throw InvalidArgument("time index " + std::to_string(k) + " outside 0.." +
                              std::to_string(grid.levels() - 1));
    return std::views::iota(0, grid.active(k));
}

}  // namespace stefan
