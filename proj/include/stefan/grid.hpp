#pragma once

#include <ranges>
#include <span>
#include <vector>

namespace stefan {

/// Uniform time grid t_k = k * tau, k = 0..n, tau = T / n.
struct TimeGrid {
    int n = 0;
    double T = 0.0;
    double tau = 0.0;
    std::vector<double> nodes;

    double t(int k) const { return nodes[static_cast<std::size_t>(k)]; }
};

TimeGrid build_time_grid(double T, int n);

/// A boundary value that was merged into an existing node because inserting
/// it would have produced a cell narrower than the snap threshold.
struct Snap {
    int time_index;
    double requested;
    double node;
};

/// Spatial grid on [0, ell] adapted to a discrete boundary [s]_n: each s_k is
/// a node, and nodes are appended in the sorted order of the boundary values
/// without moving earlier ones.
struct MovingGrid {
    std::vector<double> xs;    ///< x_0 = 0 < ... < x_N = ell
    std::vector<double> hs;    ///< h_i = x_{i+1} - x_i
    std::vector<int> perm;     ///< s[perm[0]] <= s[perm[1]] <= ...
    std::vector<int> m;        ///< m[k]: node index of s_k
    double h = 0.0;            ///< base step on [0, s_min]
    double h_bar = 0.0;        ///< tail step on [s_max, ell] (0 if no tail)
    double Delta = 0.0;        ///< max_i h_i
    std::vector<Snap> snaps;

    int cells() const { return static_cast<int>(hs.size()); }
    int active(int k) const { return m[static_cast<std::size_t>(k)]; }
    int levels() const { return static_cast<int>(m.size()); }
    double ell() const { return xs.back(); }

    /// Index of the cell containing x (right-closed at the last node).
    int cell_of(double x) const;

    /// Delta / sqrt(tau); the grid honours h = O(sqrt(tau)) with constant C
    /// when this is <= C.
    double htau_ratio(double tau) const;
};

/// Cells with x_{i+1} - x_i below this fraction of ell are not created.
inline constexpr double kSnapFraction = 1e-12;

/// Builds the boundary-adapted grid. s must have n+1 >= 2 entries with
/// delta <= s_k <= ell; m0 >= 2 cells are placed uniformly on [0, min s].
MovingGrid build_moving_grid(std::span<const double> s, double ell, double delta, int m0);

enum class M0Policy {
    SqrtTau,  ///< h ~ C sqrt(tau)
    Tau,      ///< h ~ C tau
    Fixed,    ///< m0 given explicitly
};

struct GridOptions {
    M0Policy policy = M0Policy::SqrtTau;
    double htau_c = 1.0;
    int m0 = 0;  ///< used with M0Policy::Fixed
};

int choose_m0(double s_min, double tau, const GridOptions& options);

/// build_moving_grid with m0 chosen by `options`.
MovingGrid build_moving_grid(std::span<const double> s, double ell, double delta, double tau,
                             const GridOptions& options);

/// Active cell indices 0..m(k)-1 of time level k.
std::ranges::iota_view<int, int> segment_cells(const MovingGrid& grid, int k);

}  // namespace stefan
