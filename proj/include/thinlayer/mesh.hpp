/**
 * @file mesh.hpp
 * @brief Cell/edge geometry for cell-centered finite volumes and the 1D dual mesh.
 *
 * A Mesh is a list of control volumes ("cells") and a list of directed edges.
 * Every interior edge is stored in both orientations, and the two copies are
 * linked through Edge::twin so that flux assembly can compute one value per
 * undirected edge and negate it for the reverse direction.
 *
 * Domain boundaries carry no edges: the outer boundary is no-flow.
 */
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <memory>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace thinlayer {

/// Points and vectors in R^d, d <= 2. Unused components are zero.
using Point = std::array<double, 2>;

inline double dot(const Point& a, const Point& b) { return a[0] * b[0] + a[1] * b[1]; }
inline double norm(const Point& a) { return std::sqrt(dot(a, a)); }
inline Point operator+(const Point& a, const Point& b) { return {a[0] + b[0], a[1] + b[1]}; }
inline Point operator-(const Point& a, const Point& b) { return {a[0] - b[0], a[1] - b[1]}; }
inline Point operator*(double s, const Point& a) { return {s * a[0], s * a[1]}; }
inline Point operator-(const Point& a) { return {-a[0], -a[1]}; }

class GeometryError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct Cell {
    double area = 0.0;      ///< |omega_j| (a length in 1D)
    Point centroid{};       ///< representative point; the owning node for dual cells
    bool boundary = false;  ///< touches the outer boundary of the domain
    Point center{};         ///< geometric midpoint, used as the one-point quadrature node
};

struct Edge {
    int j = -1;               ///< cell the normal points out of
    int k = -1;               ///< neighbouring cell
    double length = 0.0;      ///< l_(j,k); identically 1 in 1D
    Point normal{};           ///< unit normal, outward from cell j
    double distance = 0.0;    ///< centroid-to-centroid distance
    Point midpoint{};         ///< point on the shared edge used for flux evaluation
    std::size_t twin = 0;     ///< index of the (k,j) copy
};

/// One entry of E_j as returned by Mesh::edge_neighbors.
struct Neighbor {
    int k;
    double length;
    Point normal;
};

class Mesh {
public:
    Mesh() = default;

    int dimension() const { return dim_; }
    std::size_t size() const { return cells_.size(); }
    std::span<const Cell> cells() const { return cells_; }
    const Cell& cell(int j) const { return cells_.at(static_cast<std::size_t>(j)); }
    std::span<const Edge> edges() const { return edges_; }

    /// Directed edges leaving cell j, contiguous in edges().
    std::span<const Edge> edges_of(int j) const
    {
        check_id(j);
        const auto b = offsets_[static_cast<std::size_t>(j)];
        const auto e = offsets_[static_cast<std::size_t>(j) + 1];
        return std::span<const Edge>(edges_).subspan(b, e - b);
    }

    std::size_t edge_begin(int j) const { return offsets_.at(static_cast<std::size_t>(j)); }

    std::vector<Neighbor> edge_neighbors(int j) const
    {
        std::vector<Neighbor> out;
        for (const auto& e : edges_of(j)) out.push_back({e.k, e.length, e.normal});
        return out;
    }

    /// Number of undirected interior edges.
    std::size_t interior_edge_count() const { return edges_.size() / 2; }

    double domain_volume() const { return volume_; }
    /// Bounding box of the domain: {xmin, xmax, ymin, ymax}.
    const std::array<double, 4>& bounds() const { return bounds_; }

    /// True for the node-centered dual mesh used by the FVE backend.
    bool is_dual() const { return is_dual_; }
    bool has_dual() const { return dual_ != nullptr; }
    const Mesh& dual() const
    {
        if (!dual_) throw GeometryError("mesh has no dual (FVE requires a 1D interval mesh)");
        return *dual_;
    }
    std::shared_ptr<const Mesh> dual_ptr() const { return dual_; }

    /// Plain-text dump: one line per cell and one per directed edge.
    void dump(std::ostream& os) const
    {
        os << std::setprecision(17);
        os << "# dimension " << dim_ << " cells " << cells_.size() << " edges " << edges_.size() << '\n';
        for (std::size_t j = 0; j < cells_.size(); ++j) {
            const auto& c = cells_[j];
            os << "cell " << j << ' ' << c.centroid[0];
            if (dim_ == 2) os << ' ' << c.centroid[1];
            os << ' ' << c.area << '\n';
        }
        for (const auto& e : edges_) {
            os << "edge " << e.j << ' ' << e.k << ' ' << e.length << ' ' << e.normal[0];
            if (dim_ == 2) os << ' ' << e.normal[1];
            os << '\n';
        }
    }

private:
    friend Mesh build_interval_mesh(double, double, int);
    friend Mesh build_rect_mesh(std::array<double, 2>, std::array<double, 2>, int, int);
    friend Mesh build_interval_dual(const std::vector<double>&);

    void check_id(int j) const
    {
        if (j < 0 || static_cast<std::size_t>(j) >= cells_.size())
            throw std::out_of_range("unknown cell id " + std::to_string(j));
    }

    // Sorts edges by source cell, builds CSR offsets and twin links.
    void finalize()
    {
        std::stable_sort(edges_.begin(), edges_.end(),
                         [](const Edge& a, const Edge& b) { return a.j < b.j || (a.j == b.j && a.k < b.k); });
        offsets_.assign(cells_.size() + 1, 0);
        for (const auto& e : edges_) ++offsets_[static_cast<std::size_t>(e.j) + 1];
        for (std::size_t j = 0; j < cells_.size(); ++j) offsets_[j + 1] += offsets_[j];
        for (std::size_t i = 0; i < edges_.size(); ++i) {
            const auto& e = edges_[i];
            const auto b = offsets_[static_cast<std::size_t>(e.k)];
            const auto f = offsets_[static_cast<std::size_t>(e.k) + 1];
            bool found = false;
            for (auto t = b; t < f; ++t) {
                if (edges_[t].k == e.j) {
                    edges_[i].twin = t;
                    found = true;
                    break;
                }
            }
            if (!found) throw GeometryError("edge without reverse orientation");
        }
    }

    void add_edge_pair(int j, int k, double length, Point normal_jk, double distance, Point midpoint)
    {
        edges_.push_back({j, k, length, normal_jk, distance, midpoint, 0});
        edges_.push_back({k, j, length, -normal_jk, distance, midpoint, 0});
    }

    int dim_ = 1;
    std::vector<Cell> cells_;
    std::vector<Edge> edges_;
    std::vector<std::size_t> offsets_{0};
    double volume_ = 0.0;
    std::array<double, 4> bounds_{};
    bool is_dual_ = false;
    std::shared_ptr<const Mesh> dual_;
};

/// Node-centered dual of a 1D partition with the given (sorted) node coordinates.
/// Dual cells run midpoint to midpoint, halved at the two end nodes.
inline Mesh build_interval_dual(const std::vector<double>& nodes)
{
    if (nodes.size() < 2) throw GeometryError("dual mesh needs at least two nodes");
    Mesh m;
    m.dim_ = 1;
    m.is_dual_ = true;
    const std::size_t nn = nodes.size();
    m.cells_.resize(nn);
    for (std::size_t i = 0; i < nn; ++i) {
        const double left = (i == 0) ? nodes[0] : 0.5 * (nodes[i - 1] + nodes[i]);
        const double right = (i + 1 == nn) ? nodes[nn - 1] : 0.5 * (nodes[i] + nodes[i + 1]);
        if (!(right > left)) throw GeometryError("dual cell with non-positive width");
        m.cells_[i] = {right - left, {nodes[i], 0.0}, i == 0 || i + 1 == nn, {0.5 * (left + right), 0.0}};
    }
    for (std::size_t i = 0; i + 1 < nn; ++i) {
        const double d = nodes[i + 1] - nodes[i];
        m.add_edge_pair(static_cast<int>(i), static_cast<int>(i + 1), 1.0, {1.0, 0.0}, d,
                        {0.5 * (nodes[i] + nodes[i + 1]), 0.0});
    }
    m.volume_ = nodes.back() - nodes.front();
    m.bounds_ = {nodes.front(), nodes.back(), 0.0, 0.0};
    m.finalize();
    return m;
}

/// Uniform partition of [a,b] into n cells, with its node-centered dual attached.
inline Mesh build_interval_mesh(double a, double b, int n)
{
    if (n < 1) throw GeometryError("interval mesh needs n >= 1 cells");
    if (!(b > a) || !std::isfinite(a) || !std::isfinite(b)) throw GeometryError("interval mesh needs b > a");
    Mesh m;
    m.dim_ = 1;
    const double h = (b - a) / n;
    m.cells_.resize(static_cast<std::size_t>(n));
    std::vector<double> nodes(static_cast<std::size_t>(n) + 1);
    for (int i = 0; i <= n; ++i) nodes[static_cast<std::size_t>(i)] = (i == n) ? b : a + i * h;
    for (int j = 0; j < n; ++j) {
        const double xl = nodes[static_cast<std::size_t>(j)];
        const double xr = nodes[static_cast<std::size_t>(j) + 1];
        m.cells_[static_cast<std::size_t>(j)] = {h, {0.5 * (xl + xr), 0.0}, j == 0 || j == n - 1, {0.5 * (xl + xr), 0.0}};
    }
    for (int j = 0; j + 1 < n; ++j) {
        const double d = m.cells_[static_cast<std::size_t>(j) + 1].centroid[0] - m.cells_[static_cast<std::size_t>(j)].centroid[0];
        m.add_edge_pair(j, j + 1, 1.0, {1.0, 0.0}, d, {nodes[static_cast<std::size_t>(j) + 1], 0.0});
    }
    m.volume_ = b - a;
    m.bounds_ = {a, b, 0.0, 0.0};
    m.finalize();
    m.dual_ = std::make_shared<const Mesh>(build_interval_dual(nodes));
    return m;
}

/// nx-by-ny rectangles on [x0,x1] x [y0,y1]; cell id = ix + nx*iy.
inline Mesh build_rect_mesh(std::array<double, 2> xr, std::array<double, 2> yr, int nx, int ny)
{
    if (nx < 1 || ny < 1) throw GeometryError("rectangular mesh needs positive cell counts");
    if (!(xr[1] > xr[0]) || !(yr[1] > yr[0])) throw GeometryError("rectangular mesh needs nonempty ranges");
    Mesh m;
    m.dim_ = 2;
    const double hx = (xr[1] - xr[0]) / nx;
    const double hy = (yr[1] - yr[0]) / ny;
    auto id = [nx](int ix, int iy) { return ix + nx * iy; };
    m.cells_.resize(static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny));
    for (int iy = 0; iy < ny; ++iy) {
        for (int ix = 0; ix < nx; ++ix) {
            const bool bd = ix == 0 || iy == 0 || ix == nx - 1 || iy == ny - 1;
            const Point c{xr[0] + (ix + 0.5) * hx, yr[0] + (iy + 0.5) * hy};
            m.cells_[static_cast<std::size_t>(id(ix, iy))] = {hx * hy, c, bd, c};
        }
    }
    for (int iy = 0; iy < ny; ++iy) {
        for (int ix = 0; ix < nx; ++ix) {
            const Point c = m.cells_[static_cast<std::size_t>(id(ix, iy))].centroid;
            if (ix + 1 < nx) m.add_edge_pair(id(ix, iy), id(ix + 1, iy), hy, {1.0, 0.0}, hx, {c[0] + 0.5 * hx, c[1]});
            if (iy + 1 < ny) m.add_edge_pair(id(ix, iy), id(ix, iy + 1), hx, {0.0, 1.0}, hy, {c[0], c[1] + 0.5 * hy});
        }
    }
    m.volume_ = (xr[1] - xr[0]) * (yr[1] - yr[0]);
    m.bounds_ = {xr[0], xr[1], yr[0], yr[1]};
    m.finalize();
    return m;
}

}  // namespace thinlayer
