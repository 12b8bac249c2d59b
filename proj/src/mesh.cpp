#include "difftomo/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <sstream>

#include "difftomo/error.hpp"

namespace difftomo {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::SingularSystem: return "singular-system";
    case ErrorKind::SingularEvaluation: return "singular-evaluation";
    case ErrorKind::DomainViolation: return "domain-violation";
    case ErrorKind::UnsupportedOrder: return "unsupported-order";
    case ErrorKind::InvalidGeometry: return "invalid-geometry";
    case ErrorKind::InvalidCovariance: return "invalid-covariance";
    case ErrorKind::InvalidData: return "invalid-data";
    case ErrorKind::InvalidShape: return "invalid-shape";
    case ErrorKind::InternalError: return "internal-error";
  }
  return "unknown";
}

namespace {

double tri_area(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c) {
  return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y()));
}

}  // namespace

double Mesh::signed_area(int e) const {
  const auto& t = triangles[e];
  return tri_area(nodes[t[0]], nodes[t[1]], nodes[t[2]]);
}

double Mesh::total_area() const {
  double a = 0.0;
  for (int e = 0; e < element_count(); ++e) a += signed_area(e);
  return a;
}

std::vector<int> Mesh::boundary_nodes() const {
  std::map<int, int> next;
  for (const auto& be : boundary_edges) next[be.a] = be.b;
  std::vector<int> out;
  std::vector<bool> seen(nodes.size(), false);
  for (const auto& be : boundary_edges) {
    if (seen[be.a]) continue;
    int cur = be.a;
    while (!seen[cur]) {
      seen[cur] = true;
      out.push_back(cur);
      cur = next[cur];
    }
  }
  return out;
}

std::vector<bool> Mesh::boundary_mask() const {
  std::vector<bool> m(nodes.size(), false);
  for (const auto& be : boundary_edges) m[be.a] = m[be.b] = true;
  return m;
}

Eigen::VectorXd Mesh::lumped_mass() const {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(node_count());
  for (int e = 0; e < element_count(); ++e) {
    const double a = signed_area(e) / 3.0;
    for (int v : triangles[e]) m[v] += a;
  }
  return m;
}

std::vector<std::vector<int>> Mesh::adjacency() const {
  std::vector<std::vector<int>> adj(nodes.size());
  for (const auto& t : triangles)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        if (i != j) adj[t[i]].push_back(t[j]);
  for (auto& a : adj) {
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
  }
  return adj;
}

void Mesh::validate() const {
  const int n = node_count();
  require(n >= 3 && !triangles.empty(), ErrorKind::InvalidGeometry, "mesh is empty");
  for (int e = 0; e < element_count(); ++e) {
    for (int v : triangles[e])
      require(v >= 0 && v < n, ErrorKind::InvalidGeometry, "triangle index out of range");
    require(signed_area(e) > 0.0, ErrorKind::InvalidGeometry,
            "element " + std::to_string(e) + " has non-positive signed area");
  }
  std::map<std::pair<int, int>, int> edge_use;
  for (const auto& t : triangles)
    for (int i = 0; i < 3; ++i) {
      int a = t[i], b = t[(i + 1) % 3];
      edge_use[{std::min(a, b), std::max(a, b)}]++;
    }
  std::vector<int> out_deg(n, 0), in_deg(n, 0);
  for (const auto& be : boundary_edges) {
    require(be.a >= 0 && be.a < n && be.b >= 0 && be.b < n, ErrorKind::InvalidGeometry,
            "boundary edge index out of range");
    auto it = edge_use.find({std::min(be.a, be.b), std::max(be.a, be.b)});
    require(it != edge_use.end() && it->second == 1, ErrorKind::InvalidGeometry,
            "boundary edge does not belong to exactly one triangle");
    out_deg[be.a]++;
    in_deg[be.b]++;
  }
  for (int v = 0; v < n; ++v)
    require(out_deg[v] == in_deg[v] && out_deg[v] <= 1, ErrorKind::InvalidGeometry,
            "boundary edges do not form closed loops");
  std::size_t single = 0;
  for (const auto& [k, c] : edge_use) {
    require(c <= 2, ErrorKind::InvalidGeometry, "edge shared by more than two triangles");
    if (c == 1) ++single;
  }
  require(single == boundary_edges.size(), ErrorKind::InvalidGeometry,
          "boundary edge list is incomplete");
}

Mesh Mesh::from_triangles(std::vector<Eigen::Vector2d> nodes,
                          std::vector<std::array<int, 3>> triangles, double spacing) {
  Mesh m;
  m.nodes = std::move(nodes);
  m.triangles = std::move(triangles);
  m.spacing = spacing;
  const int n = m.node_count();
  for (auto& t : m.triangles) {
    for (int v : t) require(v >= 0 && v < n, ErrorKind::InvalidGeometry, "triangle index out of range");
    if (tri_area(m.nodes[t[0]], m.nodes[t[1]], m.nodes[t[2]]) < 0.0) std::swap(t[1], t[2]);
  }
  // directed edges; a boundary edge has no opposite twin
  std::map<std::pair<int, int>, int> directed;
  for (const auto& t : m.triangles)
    for (int i = 0; i < 3; ++i) directed[{t[i], t[(i + 1) % 3]}]++;
  for (const auto& [e, cnt] : directed) {
    if (directed.count({e.second, e.first})) continue;
    BoundaryEdge be;
    be.a = e.first;
    be.b = e.second;
    Eigen::Vector2d d = m.nodes[be.b] - m.nodes[be.a];
    be.normal = Eigen::Vector2d(d.y(), -d.x()).normalized();
    m.boundary_edges.push_back(be);
  }
  // loop order
  std::map<int, std::size_t> by_start;
  for (std::size_t i = 0; i < m.boundary_edges.size(); ++i) by_start[m.boundary_edges[i].a] = i;
  std::vector<BoundaryEdge> ordered;
  std::vector<bool> used(m.boundary_edges.size(), false);
  for (std::size_t s = 0; s < m.boundary_edges.size(); ++s) {
    std::size_t i = s;
    while (!used[i]) {
      used[i] = true;
      ordered.push_back(m.boundary_edges[i]);
      auto it = by_start.find(m.boundary_edges[i].b);
      if (it == by_start.end()) break;
      i = it->second;
    }
  }
  m.boundary_edges = std::move(ordered);
  return m;
}

Mesh build_disk_mesh(double radius, double h) {
  require(radius > 0.0 && std::isfinite(radius), ErrorKind::InvalidArgument, "radius must be positive");
  require(h > 0.0 && std::isfinite(h), ErrorKind::InvalidArgument, "h must be positive");
  require(h < radius, ErrorKind::InvalidArgument, "h must be smaller than the radius");
  const int rings = std::max(1, static_cast<int>(std::floor(radius / h + 1e-9)));

  std::vector<Eigen::Vector2d> nodes;
  nodes.emplace_back(0.0, 0.0);
  auto ring_start = [](int i) { return i == 0 ? 0 : 1 + 3 * i * (i - 1); };
  for (int i = 1; i <= rings; ++i) {
    const double r = radius * i / rings;
    const int cnt = 6 * i;
    for (int j = 0; j < cnt; ++j) {
      const double t = 2.0 * std::numbers::pi * j / cnt;
      nodes.emplace_back(r * std::cos(t), r * std::sin(t));
    }
  }
  auto node_id = [&](int ring, int j) {
    if (ring == 0) return 0;
    const int cnt = 6 * ring;
    return ring_start(ring) + ((j % cnt) + cnt) % cnt;
  };

  std::vector<std::array<int, 3>> tris;
  for (int i = 1; i <= rings; ++i) {
    const int inner_n = i - 1;  // inner nodes per sector (excluding the next corner)
    for (int s = 0; s < 6; ++s) {
      auto inner = [&](int p) { return i == 1 ? 0 : node_id(i - 1, s * inner_n + p); };
      auto outer = [&](int q) { return node_id(i, s * i + q); };
      int p = 0, q = 0;
      const int p_end = i == 1 ? 0 : inner_n;
      while (p < p_end || q < i) {
        bool advance_outer;
        if (q >= i) advance_outer = false;
        else if (p >= p_end) advance_outer = true;
        else advance_outer = static_cast<long>(q + 1) * inner_n <= static_cast<long>(p + 1) * i;
        if (advance_outer) {
          tris.push_back({inner(p), outer(q), outer(q + 1)});
          ++q;
        } else {
          tris.push_back({inner(p), outer(q), inner(p + 1)});
          ++p;
        }
      }
    }
  }
  Mesh m = Mesh::from_triangles(std::move(nodes), std::move(tris), radius / rings);
  m.validate();
  return m;
}

int locate_point(const Mesh& mesh, const Eigen::Vector2d& p, Eigen::Vector3d& bary) {
  for (int e = 0; e < mesh.element_count(); ++e) {
    const auto& t = mesh.triangles[e];
    const auto &a = mesh.nodes[t[0]], &b = mesh.nodes[t[1]], &c = mesh.nodes[t[2]];
    const double area = tri_area(a, b, c);
    const double l0 = tri_area(p, b, c) / area;
    const double l1 = tri_area(a, p, c) / area;
    const double l2 = 1.0 - l0 - l1;
    if (l0 >= -1e-12 && l1 >= -1e-12 && l2 >= -1e-12) {
      bary = Eigen::Vector3d(l0, l1, l2);
      return e;
    }
  }
  return -1;
}

Eigen::SparseMatrix<double> interpolation_matrix(const Mesh& src, const Mesh& dst) {
  std::vector<Eigen::Triplet<double>> trip;
  for (int v = 0; v < dst.node_count(); ++v) {
    Eigen::Vector3d bary;
    const int e = locate_point(src, dst.nodes[v], bary);
    if (e >= 0) {
      for (int i = 0; i < 3; ++i)
        if (bary[i] != 0.0) trip.emplace_back(v, src.triangles[e][i], bary[i]);
    } else {
      int best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (int u = 0; u < src.node_count(); ++u) {
        const double d = (src.nodes[u] - dst.nodes[v]).squaredNorm();
        if (d < bd) bd = d, best = u;
      }
      trip.emplace_back(v, best, 1.0);
    }
  }
  Eigen::SparseMatrix<double> P(dst.node_count(), src.node_count());
  P.setFromTriplets(trip.begin(), trip.end());
  return P;
}

Eigen::VectorXd interpolate_nodal(const Mesh& src, const Eigen::VectorXd& values, const Mesh& dst) {
  require(values.size() == src.node_count(), ErrorKind::InvalidArgument, "field size mismatch");
  return interpolation_matrix(src, dst) * values;
}

void ParamField::validate(int node_count) const {
  require(mu_a.size() == node_count && diff.size() == node_count, ErrorKind::InvalidArgument,
          "parameter field size does not match node count");
  require(std::isfinite(c) && c > 0.0, ErrorKind::InvalidArgument, "c must be positive");
  for (int i = 0; i < node_count; ++i) {
    require(std::isfinite(mu_a[i]) && mu_a[i] >= 0.0, ErrorKind::InvalidArgument,
            "mu_a must be non-negative");
    require(std::isfinite(diff[i]) && diff[i] > 0.0, ErrorKind::InvalidArgument,
            "diffusion coefficient must be positive");
  }
}

ParamField ParamField::uniform(int node_count, double mu_a, double diff, double c) {
  ParamField p;
  p.mu_a = Eigen::VectorXd::Constant(node_count, mu_a);
  p.diff = Eigen::VectorXd::Constant(node_count, diff);
  p.c = c;
  p.validate(node_count);
  return p;
}

void Phantom::validate() const {
  require(mu_a >= 0.0 && diff > 0.0 && c > 0.0, ErrorKind::InvalidArgument, "invalid background");
  for (const auto& inc : inclusions) {
    require(inc.radius > 0.0, ErrorKind::InvalidArgument, "inclusion radius must be positive");
    require(inc.mu_a >= 0.0 && inc.diff > 0.0, ErrorKind::InvalidArgument,
            "invalid inclusion parameters");
  }
}

ParamField rasterize_phantom(const Phantom& phantom, const Mesh& mesh) {
  phantom.validate();
  ParamField p = ParamField::uniform(mesh.node_count(), phantom.mu_a, phantom.diff, phantom.c);
  for (const auto& inc : phantom.inclusions)
    for (int v = 0; v < mesh.node_count(); ++v)
      if ((mesh.nodes[v] - inc.center).norm() <= inc.radius) {
        p.mu_a[v] = inc.mu_a;
        p.diff[v] = inc.diff;
      }
  return p;
}

void write_mesh(const Mesh& mesh, const std::string& path) {
  std::ofstream f(path);
  require(f.good(), ErrorKind::InvalidArgument, "cannot open " + path);
  f << std::setprecision(17);
  f << "MESH2D " << mesh.node_count() << ' ' << mesh.element_count() << ' '
    << mesh.boundary_edges.size() << '\n';
  for (const auto& n : mesh.nodes) f << n.x() << ' ' << n.y() << '\n';
  for (const auto& t : mesh.triangles) f << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  for (const auto& b : mesh.boundary_edges) f << b.a << ' ' << b.b << '\n';
}

Mesh read_mesh(const std::string& path) {
  std::ifstream f(path);
  require(f.good(), ErrorKind::InvalidArgument, "cannot open " + path);
  std::string tag;
  long nn = -1, ne = -1, nb = -1;
  f >> tag >> nn >> ne >> nb;
  require(f.good() && tag == "MESH2D" && nn > 0 && ne > 0 && nb >= 0, ErrorKind::InvalidGeometry,
          "bad mesh header in " + path);
  std::vector<Eigen::Vector2d> nodes(nn);
  for (auto& n : nodes) f >> n.x() >> n.y();
  std::vector<std::array<int, 3>> tris(ne);
  for (auto& t : tris) f >> t[0] >> t[1] >> t[2];
  std::vector<std::pair<int, int>> edges(nb);
  for (auto& e : edges) f >> e.first >> e.second;
  require(!f.fail(), ErrorKind::InvalidGeometry, "truncated mesh file " + path);
  Mesh m = Mesh::from_triangles(std::move(nodes), std::move(tris));
  require(m.boundary_edges.size() == static_cast<std::size_t>(nb), ErrorKind::InvalidGeometry,
          "boundary edge count does not match triangulation");
  // spacing: mean edge length
  double sum = 0.0;
  int cnt = 0;
  for (const auto& t : m.triangles)
    for (int i = 0; i < 3; ++i, ++cnt) sum += (m.nodes[t[i]] - m.nodes[t[(i + 1) % 3]]).norm();
  m.spacing = sum / cnt;
  m.validate();
  return m;
}

void write_params(const ParamField& params, const std::string& path) {
  std::ofstream f(path);
  require(f.good(), ErrorKind::InvalidArgument, "cannot open " + path);
  f << std::setprecision(17) << "node_index,mu_a,diff\n";
  for (int i = 0; i < params.mu_a.size(); ++i)
    f << i << ',' << params.mu_a[i] << ',' << params.diff[i] << '\n';
}

ParamField read_params(const std::string& path, double c) {
  std::ifstream f(path);
  require(f.good(), ErrorKind::InvalidArgument, "cannot open " + path);
  std::string line;
  std::getline(f, line);
  require(line.rfind("node_index", 0) == 0, ErrorKind::InvalidData, "bad parameter header");
  std::vector<double> mu, d;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    long idx;
    double a, b;
    ss >> idx >> a >> b;
    require(!ss.fail() && idx == static_cast<long>(mu.size()), ErrorKind::InvalidData,
            "bad parameter row: " + line);
    mu.push_back(a);
    d.push_back(b);
  }
  ParamField p;
  p.mu_a = Eigen::Map<Eigen::VectorXd>(mu.data(), mu.size());
  p.diff = Eigen::Map<Eigen::VectorXd>(d.data(), d.size());
  p.c = c;
  p.validate(static_cast<int>(mu.size()));
  return p;
}

}  // namespace difftomo
