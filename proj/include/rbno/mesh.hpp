#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <utility>
#include <vector>

#include "rbno/linalg.hpp"

namespace rbno {

struct Point {
    double x = 0.0, y = 0.0;
};

inline Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
inline Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
inline Point operator*(double s, Point a) { return {s * a.x, s * a.y}; }
inline double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
inline double norm(Point a) { return std::sqrt(dot(a, a)); }

enum class BoundaryTag : int { Left = 0, Right = 1, Top = 2, Bottom = 3 };

inline const char* to_string(BoundaryTag t) {
    switch (t) {
        case BoundaryTag::Left: return "left";
        case BoundaryTag::Right: return "right";
        case BoundaryTag::Top: return "top";
        case BoundaryTag::Bottom: return "bottom";
    }
    return "?";
}

// Structured triangulation of an axis-aligned rectangle. Every grid square is
// split by the diagonal from its lower-left to its upper-right corner, so
// refining nx,ny by 2 produces a nested mesh. Edges are globally oriented from
// the lower to the higher vertex index. Immutable after construction.
struct Mesh {
    double x0 = 0.0, y0 = 0.0, x1 = 1.0, y1 = 1.0;
    std::size_t nx = 0, ny = 0;

    std::vector<Point> vertices;
    std::vector<std::array<std::size_t, 3>> cells;            // counterclockwise
    std::vector<std::array<std::size_t, 2>> edges;            // lower -> higher vertex
    std::vector<std::array<std::size_t, 3>> cell_edges;       // edge index per local edge
    std::vector<std::array<int, 3>> cell_edge_signs;          // +1 if local matches global
    std::vector<std::pair<std::size_t, BoundaryTag>> boundary_facets;

    std::size_t n_vertices() const { return vertices.size(); }
    std::size_t n_cells() const { return cells.size(); }
    std::size_t n_edges() const { return edges.size(); }

    double dx() const { return (x1 - x0) / static_cast<double>(nx); }
    double dy() const { return (y1 - y0) / static_cast<double>(ny); }
    double h() const { return std::max(dx(), dy()); }

    std::size_t vertex_index(std::size_t i, std::size_t j) const { return j * (nx + 1) + i; }

    // Locates the cell containing p (clamped to the rectangle).
    std::size_t locate_cell(Point p) const {
        double fx = (p.x - x0) / dx();
        double fy = (p.y - y0) / dy();
        auto clampi = [](double f, std::size_t n) {
            auto i = static_cast<long long>(std::floor(f));
            if (i < 0) i = 0;
            if (i >= static_cast<long long>(n)) i = static_cast<long long>(n) - 1;
            return static_cast<std::size_t>(i);
        };
        std::size_t i = clampi(fx, nx), j = clampi(fy, ny);
        double rx = fx - static_cast<double>(i);
        double ry = fy - static_cast<double>(j);
        std::size_t square = j * nx + i;
        return 2 * square + (rx >= ry ? 0 : 1);  // lower triangle has rx >= ry
    }
};

// Geometry of one cell: affine map from the reference triangle
// {(0,0),(1,0),(0,1)}, plus edge lengths and outward unit normals in the
// local edge order (edge a is opposite vertex a).
struct CellGeometry {
    Point v0, v1, v2;
    double jac[2][2];      // columns (v1-v0), (v2-v0)
    double inv_t[2][2];    // inverse transpose of jac
    double det = 0.0;      // = 2*area
    double area = 0.0;
    std::array<double, 3> edge_length{};
    std::array<Point, 3> outward_normal{};
    Point centroid;

    Point map_to_physical(double xi, double eta) const {
        return {v0.x + jac[0][0] * xi + jac[0][1] * eta, v0.y + jac[1][0] * xi + jac[1][1] * eta};
    }
};

inline CellGeometry cell_geometry(const Mesh& mesh, std::size_t cell) {
    const auto& c = mesh.cells.at(cell);
    CellGeometry g;
    g.v0 = mesh.vertices[c[0]];
    g.v1 = mesh.vertices[c[1]];
    g.v2 = mesh.vertices[c[2]];
    g.jac[0][0] = g.v1.x - g.v0.x;
    g.jac[1][0] = g.v1.y - g.v0.y;
    g.jac[0][1] = g.v2.x - g.v0.x;
    g.jac[1][1] = g.v2.y - g.v0.y;
    g.det = g.jac[0][0] * g.jac[1][1] - g.jac[0][1] * g.jac[1][0];
    if (g.det <= 0.0) throw Error("cell_geometry: non-positive orientation");
    g.area = 0.5 * g.det;
    g.inv_t[0][0] = g.jac[1][1] / g.det;
    g.inv_t[0][1] = -g.jac[1][0] / g.det;
    g.inv_t[1][0] = -g.jac[0][1] / g.det;
    g.inv_t[1][1] = g.jac[0][0] / g.det;
    g.centroid = {(g.v0.x + g.v1.x + g.v2.x) / 3.0, (g.v0.y + g.v1.y + g.v2.y) / 3.0};

    const Point vv[3] = {g.v0, g.v1, g.v2};
    for (int a = 0; a < 3; ++a) {
        Point pa = vv[(a + 1) % 3], pb = vv[(a + 2) % 3];  // edge opposite vertex a
        Point t = pb - pa;
        g.edge_length[static_cast<std::size_t>(a)] = norm(t);
        // CCW cells: rotating the traversal direction by -90 deg points outward
        Point n{t.y / norm(t), -t.x / norm(t)};
        g.outward_normal[static_cast<std::size_t>(a)] = n;
    }
    return g;
}

inline Mesh build_rect_mesh(double x0, double y0, double x1, double y1, std::size_t nx,
                            std::size_t ny) {
    if (nx < 1 || ny < 1) throw Error("build_rect_mesh: cell counts must be >= 1");
    if (!(x1 > x0) || !(y1 > y0)) throw Error("build_rect_mesh: degenerate rectangle");

    Mesh m;
    m.x0 = x0;
    m.y0 = y0;
    m.x1 = x1;
    m.y1 = y1;
    m.nx = nx;
    m.ny = ny;

    m.vertices.reserve((nx + 1) * (ny + 1));
    for (std::size_t j = 0; j <= ny; ++j)
        for (std::size_t i = 0; i <= nx; ++i)
            m.vertices.push_back({x0 + (x1 - x0) * static_cast<double>(i) / static_cast<double>(nx),
                                  y0 + (y1 - y0) * static_cast<double>(j) / static_cast<double>(ny)});

    m.cells.reserve(2 * nx * ny);
    for (std::size_t j = 0; j < ny; ++j)
        for (std::size_t i = 0; i < nx; ++i) {
            std::size_t a = m.vertex_index(i, j);
            std::size_t b = m.vertex_index(i + 1, j);
            std::size_t c = m.vertex_index(i + 1, j + 1);
            std::size_t d = m.vertex_index(i, j + 1);
            m.cells.push_back({a, b, c});  // lower triangle
            m.cells.push_back({a, c, d});  // upper triangle
        }

    // Global edges keyed by sorted vertex pair, indexed in first-encounter order.
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> edge_of;
    std::vector<int> adjacency_count;
    m.cell_edges.resize(m.cells.size());
    m.cell_edge_signs.resize(m.cells.size());
    for (std::size_t cidx = 0; cidx < m.cells.size(); ++cidx) {
        const auto& c = m.cells[cidx];
        for (int a = 0; a < 3; ++a) {
            std::size_t va = c[static_cast<std::size_t>((a + 1) % 3)];
            std::size_t vb = c[static_cast<std::size_t>((a + 2) % 3)];
            auto key = std::minmax(va, vb);
            auto it = edge_of.find(key);
            std::size_t e;
            if (it == edge_of.end()) {
                e = m.edges.size();
                edge_of.emplace(key, e);
                m.edges.push_back({key.first, key.second});
                adjacency_count.push_back(0);
            } else {
                e = it->second;
            }
            adjacency_count[e]++;
            m.cell_edges[cidx][static_cast<std::size_t>(a)] = e;
            m.cell_edge_signs[cidx][static_cast<std::size_t>(a)] = (va < vb) ? +1 : -1;
        }
    }

    // Boundary tagging by geometric side.
    const double tol = 1e-12;
    for (std::size_t e = 0; e < m.edges.size(); ++e) {
        if (adjacency_count[e] != 1) continue;
        Point pa = m.vertices[m.edges[e][0]];
        Point pb = m.vertices[m.edges[e][1]];
        BoundaryTag tag;
        if (std::abs(pa.x - x0) <= tol && std::abs(pb.x - x0) <= tol)
            tag = BoundaryTag::Left;
        else if (std::abs(pa.x - x1) <= tol && std::abs(pb.x - x1) <= tol)
            tag = BoundaryTag::Right;
        else if (std::abs(pa.y - y1) <= tol && std::abs(pb.y - y1) <= tol)
            tag = BoundaryTag::Top;
        else if (std::abs(pa.y - y0) <= tol && std::abs(pb.y - y0) <= tol)
            tag = BoundaryTag::Bottom;
        else
            throw Error("build_rect_mesh: boundary edge not on any rectangle side");
        m.boundary_facets.emplace_back(e, tag);
    }
    return m;
}

}  // namespace rbno
