#include "difftomo/cli.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <memory>
#include <numbers>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "difftomo/bayes.hpp"
#include "difftomo/born_series.hpp"
#include "difftomo/broken_ray.hpp"
#include "difftomo/config.hpp"
#include "difftomo/error.hpp"
#include "difftomo/fem_model.hpp"
#include "difftomo/forward.hpp"
#include "difftomo/halfspace.hpp"
#include "difftomo/io.hpp"
#include "difftomo/linear_solvers.hpp"
#include "difftomo/mesh.hpp"
#include "difftomo/nonlinear.hpp"
#include "difftomo/parallel.hpp"
#include "difftomo/shape.hpp"

namespace difftomo {

namespace fs = std::filesystem;

namespace {

struct Flags {
  std::string config;
  std::string out;
  std::string solver;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;
};

// Deterministic log plus one trailing line with the timestamp and wall times.
class RunLog {
 public:
  RunLog(std::string command, const RunConfig& cfg) : command_(std::move(command)) {
    std::ostringstream s;
    s << "command: " << command_ << '\n'
      << "config_hash: fnv1a64:" << std::hex << std::setw(16) << std::setfill('0') << cfg.hash() << std::dec
      << '\n'
      << "seed: " << cfg.str("seed") << '\n'
      << "threads: " << cfg.str("threads") << '\n';
    body_ = s.str();
  }

  template <class F>
  void stage(const std::string& name, F&& body) {
    const auto t0 = std::chrono::steady_clock::now();
    body();
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    body_ += "stage: " + name + '\n';
    std::ostringstream w;
    w << ' ' << name << '=' << std::fixed << std::setprecision(6) << dt << 's';
    times_ += w.str();
  }

  void note(const std::string& line) { body_ += line + '\n'; }

  void write(const fs::path& dir) const {
    std::ofstream f(dir / "run.log");
    require(f.good(), ErrorKind::InvalidArgument, "cannot write run.log in " + dir.string());
    const std::time_t now = std::time(nullptr);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    f << body_ << "timestamp: " << stamp << " wall:" << times_ << '\n';
  }

 private:
  std::string command_;
  std::string body_;
  std::string times_;
};

RunConfig load_config(const Flags& flags) {
  RunConfig cfg = flags.config.empty() ? RunConfig() : RunConfig::load(flags.config);
  if (flags.seed_set) cfg.set("seed", std::to_string(flags.seed));
  if (flags.threads > 0) cfg.set("threads", std::to_string(flags.threads));
  if (!flags.out.empty()) cfg.set("out", flags.out);
  if (!flags.solver.empty()) cfg.set("solver", flags.solver);
  cfg.u64("seed");
  if (cfg.integer("threads") < 1) throw ConfigError("threads must be at least 1");
  return cfg;
}

std::uint64_t noise_seed(const RunConfig& cfg) {
  return cfg.str("noise.seed").empty() ? cfg.u64("seed") : cfg.u64("noise.seed");
}

Mesh make_mesh(const RunConfig& cfg, const std::string& h_key = "mesh.h") {
  if (!cfg.str("mesh.file").empty()) return read_mesh(cfg.str("mesh.file"));
  const double h = cfg.str(h_key).empty() ? cfg.num("mesh.h") : cfg.num(h_key);
  return build_disk_mesh(cfg.num("mesh.radius"), h);
}

Phantom make_phantom(const RunConfig& cfg) {
  Phantom p;
  p.mu_a = cfg.num("phantom.mu_a");
  p.diff = cfg.num("phantom.diff");
  p.c = cfg.num("phantom.c");
  for (const auto& g : cfg.groups("phantom.inclusions")) {
    if (g.size() != 5) throw ConfigError("phantom.inclusions groups need 'x y radius mu_a diff'");
    Inclusion inc;
    inc.center = Eigen::Vector2d(g[0], g[1]);
    inc.radius = g[2];
    inc.mu_a = g[3];
    inc.diff = g[4];
    p.inclusions.push_back(inc);
  }
  p.validate();
  return p;
}

SourceDetectorLayout make_layout(const RunConfig& cfg, const Mesh& mesh) {
  return ring_layout(mesh, cfg.integer("layout.sources"), cfg.integer("layout.detectors"),
                     cfg.num("layout.half_width"), cfg.num("layout.offset"));
}

Unknowns make_unknowns(const RunConfig& cfg) {
  const std::string& u = cfg.str("solver.unknowns");
  if (u == "absorption") return Unknowns::Absorption;
  if (u == "diffusion") return Unknowns::Diffusion;
  if (u == "both") return Unknowns::Both;
  throw ConfigError("solver.unknowns must be absorption, diffusion or both");
}

NoiseKind noise_kind(const std::string& key, const std::string& name) {
  if (name == "white") return NoiseKind::White;
  if (name == "relative") return NoiseKind::Relative;
  if (name == "poisson") return NoiseKind::Poisson;
  throw ConfigError(key + " must be white, relative or poisson");
}

std::shared_ptr<FemModel> make_model(const RunConfig& cfg, const Mesh& mesh, Unknowns unknowns) {
  const ParamField bg = ParamField::uniform(mesh.node_count(), cfg.num("phantom.mu_a"), cfg.num("phantom.diff"),
                                            cfg.num("phantom.c"));
  return std::make_shared<FemModel>(mesh, make_layout(cfg, mesh), bg, cfg.num("omega"), unknowns,
                                    cfg.num("zeta"));
}

// Nodal field sampled on an n x n pixel grid over the mesh bounding box;
// pixels outside the mesh take the field minimum.
Eigen::MatrixXd nodal_image(const Mesh& mesh, const Eigen::VectorXd& values, int n) {
  Eigen::Vector2d lo = mesh.nodes[0], hi = mesh.nodes[0];
  for (const auto& p : mesh.nodes) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  Eigen::MatrixXd img = Eigen::MatrixXd::Constant(n, n, values.minCoeff());
  Eigen::Vector3d bary;
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      const Eigen::Vector2d p(lo.x() + (c + 0.5) * (hi.x() - lo.x()) / n, hi.y() - (r + 0.5) * (hi.y() - lo.y()) / n);
      const int e = locate_point(mesh, p, bary);
      if (e < 0) continue;
      double v = 0.0;
      for (int i = 0; i < 3; ++i) v += bary[i] * values[mesh.triangles[e][i]];
      img(r, c) = v;
    }
  return img;
}

void write_field_images(const Mesh& mesh, const ParamField& p, const fs::path& stem, int n) {
  write_pgm(nodal_image(mesh, p.mu_a, n), stem.string() + "_mu_a.pgm");
  write_pgm(nodal_image(mesh, p.diff, n), stem.string() + "_diff.pgm");
}

fs::path out_dir(const RunConfig& cfg) {
  const fs::path dir = cfg.str("out");
  fs::create_directories(dir);
  return dir;
}

// Adds noise drawn from the configured model to the stacked data.
Eigen::MatrixXcd add_noise(const RunConfig& cfg, const Eigen::MatrixXcd& clean) {
  const std::string& kind = cfg.str("noise.kind");
  if (kind == "none") return clean;
  const bool complex_data = cfg.num("omega") != 0.0;
  const Eigen::VectorXcd flat = flatten_data(clean);
  const Eigen::VectorXd y = complex_data ? stack_real(flat) : Eigen::VectorXd(flat.real());
  const NoiseModel noise = noise_covariance(y, noise_kind("noise.kind", kind), cfg.num("noise.level"));
  const Eigen::VectorXd noisy = y + noise.sample(noise_seed(cfg));
  const long m = flat.size();
  Eigen::VectorXcd out(m);
  for (long i = 0; i < m; ++i) out[i] = cdouble(noisy[i], complex_data ? noisy[m + i] : flat[i].imag());
  return unflatten_data(out, static_cast<int>(clean.rows()), static_cast<int>(clean.cols()));
}

fs::path data_path(const RunConfig& cfg) {
  if (!cfg.str("data.file").empty()) return cfg.str("data.file");
  return fs::path(cfg.str("out")) / "data.csv";
}

Covariance recon_noise(const RunConfig& cfg, const Eigen::VectorXd& y) {
  return noise_covariance(y, noise_kind("solver.noise", cfg.str("solver.noise")), cfg.num("solver.noise_level"))
      .gamma_e;
}

// Block prior over the active unknowns.
Covariance recon_prior(const RunConfig& cfg, const FemModel& model, const Eigen::VectorXd& x_bg) {
  const std::string& kind = cfg.str("solver.prior");
  const double rel = cfg.num("solver.prior_std");
  if (!(rel > 0.0)) throw ConfigError("solver.prior_std must be positive");
  if (kind == "diagonal") return Covariance::diagonal((rel * x_bg).array().square().matrix());
  if (kind == "mrf") {
    const Mesh& mesh = model.mesh();
    const int n = mesh.node_count();
    const int blocks = static_cast<int>(x_bg.size()) / n;
    Eigen::MatrixXd prec = Eigen::MatrixXd::Zero(x_bg.size(), x_bg.size());
    for (int b = 0; b < blocks; ++b) {
      const double scale = rel * x_bg[b * n];
      const PriorModel p = mrf_prior(mesh, 1.0 / (scale * scale));
      prec.block(b * n, b * n, n, n) = Eigen::MatrixXd(p.precision);
    }
    return Covariance::from_precision(prec);
  }
  throw ConfigError("solver.prior must be diagonal or mrf");
}

SolveReport solve_linearized(const RunConfig& cfg, const FemModel& model, const Eigen::VectorXd& y,
                             const Eigen::VectorXd& x_bg, const Covariance& ge, const Covariance& gx) {
  const std::string& solver = cfg.str("solver");
  const double alpha = cfg.num("solver.alpha");
  const int iters = cfg.integer("solver.iterations");
  Eigen::MatrixXd a = model.jacobian(x_bg);
  Eigen::VectorXd r = y - model.forward(x_bg);
  // absorption Jacobians are non-positive; the negated system is the same equation
  if (a.maxCoeff() <= 0.0) {
    a = -a;
    r = -r;
  }
  SolveReport rep;
  if (solver == "tikhonov") {
    rep.x = tikhonov_newton(a, r, alpha, ge, gx);
    rep.termination = "closed-form";
  } else if (solver == "cg") {
    CgOptions o;
    o.max_iterations = iters;
    rep = cg_solve(a, r, alpha, ge, gx, o);
  } else if (solver == "landweber" || solver == "steepest") {
    GradientOptions o;
    o.max_iterations = iters;
    o.method = solver == "landweber" ? GradientMethod::Landweber : GradientMethod::Steepest;
    rep = gradient_iterate(a, r, alpha, ge, gx, o);
  } else if (solver == "art" || solver == "sart" || solver == "sirt") {
    RowOptions o;
    o.max_iterations = iters;
    o.method = solver == "art" ? RowMethod::ART : solver == "sart" ? RowMethod::SART : RowMethod::SIRT;
    o.tau = cfg.num("solver.relaxation");
    o.seed = cfg.u64("seed");
    rep = row_action(a, r, o);
  } else if (solver == "mlem" || solver == "mart") {
    MultiplicativeOptions o;
    o.max_iterations = iters;
    o.method = solver == "mlem" ? MultiplicativeMethod::MLEM : MultiplicativeMethod::MART;
    o.relaxation = cfg.num("solver.relaxation");
    rep = multiplicative(a, r, o);
  } else if (solver == "icd") {
    Eigen::VectorXd dx = Eigen::VectorXd::Zero(a.cols());
    for (int k = 0; k < iters; ++k) {
      std::vector<double> obj;
      dx = icd_sweep(a, r, ge, gx, alpha, dx, cfg.u64("seed") + k, &obj);
      if (k == 0) rep.objectives.push_back(obj.front());
      rep.objectives.push_back(obj.back());
    }
    rep.x = dx;
    rep.iterations = iters;
    rep.termination = "max-iterations";
  } else {
    throw ConfigError("unknown solver '" + solver + "'");
  }
  rep.x = model.project(x_bg + rep.x);
  return rep;
}

bool is_nonlinear(const std::string& solver) {
  return solver == "gn" || solver == "lm" || solver == "ncg" || solver == "lbfgs" || solver == "kaczmarz";
}

int cmd_mesh(const RunConfig& cfg, RunLog& log) {
  const fs::path dir = out_dir(cfg);
  Mesh mesh;
  log.stage("mesh", [&] { mesh = make_mesh(cfg); });
  log.stage("write", [&] { write_mesh(mesh, (dir / "mesh.txt").string()); });
  log.note("nodes: " + std::to_string(mesh.node_count()));
  log.write(dir);
  return 0;
}

int cmd_phantom(const RunConfig& cfg, RunLog& log) {
  const fs::path dir = out_dir(cfg);
  Mesh mesh;
  ParamField truth;
  log.stage("mesh", [&] { mesh = make_mesh(cfg); });
  log.stage("phantom", [&] { truth = rasterize_phantom(make_phantom(cfg), mesh); });
  log.stage("write", [&] {
    write_mesh(mesh, (dir / "mesh.txt").string());
    write_params(truth, (dir / "truth.csv").string());
    write_field_images(mesh, truth, dir / "truth", cfg.integer("image.size"));
  });
  log.write(dir);
  return 0;
}

int cmd_simulate(const RunConfig& cfg, RunLog& log) {
  const fs::path dir = out_dir(cfg);
  Mesh mesh;
  ParamField truth;
  Eigen::MatrixXcd clean, noisy;
  log.stage("mesh", [&] { mesh = make_mesh(cfg); });
  log.stage("phantom", [&] { truth = rasterize_phantom(make_phantom(cfg), mesh); });
  log.stage("forward", [&] {
    clean = forward_map(mesh, truth, make_layout(cfg, mesh), cfg.num("omega"), cfg.num("zeta"));
  });
  log.stage("noise", [&] { noisy = add_noise(cfg, clean); });
  log.stage("write", [&] {
    write_mesh(mesh, (dir / "mesh.txt").string());
    write_params(truth, (dir / "truth.csv").string());
    write_data(clean, (dir / "data_clean.csv").string());
    write_data(noisy, (dir / "data.csv").string());
  });
  log.note("noise: " + cfg.str("noise.kind") + " level " + cfg.str("noise.level") + " seed " +
           std::to_string(noise_seed(cfg)));
  log.write(dir);
  return 0;
}

int cmd_reconstruct(const RunConfig& cfg, RunLog& log) {
  const fs::path dir = out_dir(cfg);
  const std::string solver = cfg.str("solver");
  Mesh mesh;
  std::shared_ptr<FemModel> model;
  Eigen::VectorXd y, x_bg;
  Covariance ge, gx;
  log.stage("setup", [&] {
    mesh = make_mesh(cfg, "recon.h");
    model = make_model(cfg, mesh, make_unknowns(cfg));
    const Eigen::MatrixXcd data = read_data(data_path(cfg).string());
    require(data.rows() == model->layout().n_detectors() && data.cols() == model->layout().n_sources(),
            ErrorKind::InvalidData, "data file does not match the configured layout");
    y = model->stack(data);
    x_bg = model->to_vector(model->background());
    ge = recon_noise(cfg, y);
    gx = recon_prior(cfg, *model, x_bg);
    if (!cfg.str("aem.mean.file").empty() || !cfg.str("aem.cov.file").empty()) {
      if (cfg.str("aem.mean.file").empty() || cfg.str("aem.cov.file").empty())
        throw ConfigError("aem.mean.file and aem.cov.file must be given together");
      const ApproxErrorStats st = read_approx_error(cfg.str("aem.mean.file"), cfg.str("aem.cov.file"));
      require(st.mean.size() == y.size(), ErrorKind::InvalidData, "approximation error size does not match the data");
      y -= st.mean;
      ge = Covariance::from_matrix(ge.matrix() + st.covariance);
    }
  });
  SolveReport rep;
  log.stage("solve", [&] {
    if (is_nonlinear(solver)) {
      Objective obj;
      obj.model = model;
      obj.y = y;
      obj.gamma_e = ge;
      obj.gamma_x = gx;
      obj.alpha = cfg.num("solver.alpha");
      obj.prior = Prior::gaussian(gx, x_bg);
      const int iters = cfg.integer("solver.iterations");
      if (solver == "gn" || solver == "lm") {
        GnOptions o;
        o.mode = solver == "gn" ? GnMode::Damped : GnMode::LevenbergMarquardt;
        o.max_iterations = iters;
        rep = gauss_newton(obj, x_bg, o);
      } else if (solver == "ncg") {
        NcgOptions o;
        o.max_iterations = iters;
        rep = ncg(obj, x_bg, o);
      } else if (solver == "lbfgs") {
        LbfgsOptions o;
        o.max_iterations = iters;
        o.memory = cfg.integer("solver.memory");
        rep = lbfgs(obj, x_bg, o);
      } else {
        KaczmarzOptions o;
        o.sweeps = iters;
        o.relaxation = cfg.num("solver.relaxation");
        rep = nonlinear_kaczmarz(obj, x_bg, o);
      }
    } else {
      rep = solve_linearized(cfg, *model, y, x_bg, ge, gx);
    }
  });
  log.stage("write", [&] {
    const ParamField p = model->params(rep.x);
    write_params(p, (dir / "recon.csv").string());
    write_report(rep, (dir / "report.csv").string());
    write_field_images(mesh, p, dir / "recon", cfg.integer("image.size"));
  });
  log.note("solver: " + solver + " iterations " + std::to_string(rep.iterations) + " (" + rep.termination + ")");
  log.write(dir);
  return 0;
}

std::vector<Point3> sphere_points(int n, double radius, double twist) {
  std::vector<Point3> p;
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - 2.0 * (i + 0.5) / n;
    const double r = std::sqrt(1.0 - z * z);
    const double phi = golden * i + twist;
    p.push_back(radius * Point3(r * std::cos(phi), r * std::sin(phi), z));
  }
  return p;
}

LatticeData read_lattice(const std::string& path, int n) {
  std::ifstream f(path);
  require(f.good(), ErrorKind::InvalidArgument, "cannot open " + path);
  std::string line;
  std::getline(f, line);
  require(line.rfind("i1,j1,i2,j2,re,im", 0) == 0, ErrorKind::InvalidData, "bad lattice header in " + path);
  LatticeData d = LatticeData::zeros(n);
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    int i1, j1, i2, j2;
    double re, im;
    ss >> i1 >> j1 >> i2 >> j2 >> re >> im;
    require(!ss.fail(), ErrorKind::InvalidData, "bad lattice row: " + line);
    for (int v : {i1, j1, i2, j2}) require(v >= 0 && v < n, ErrorKind::InvalidData, "lattice index out of range");
    d.at(i1, j1, i2, j2) = {re, im};
  }
  return d;
}

int cmd_direct(const RunConfig& cfg, RunLog& log) {
  const fs::path dir = out_dir(cfg);
  const std::string& method = cfg.str("direct.method");
  if (method == "broken_ray") {
    BrokenRayGeometry geom;
    geom.width = cfg.num("broken_ray.width");
    geom.theta = cfg.num("broken_ray.theta");
    SlabGrid grid;
    grid.ny = cfg.integer("broken_ray.ny");
    grid.nz = cfg.integer("broken_ray.nz");
    grid.dy = geom.width / (grid.nz - 1);
    const int over = cfg.integer("broken_ray.oversample");
    // inclusions read as (y, z, radius, value, unused) on the slab
    Eigen::MatrixXd f = Eigen::MatrixXd::Constant(grid.ny, grid.nz, cfg.num("phantom.mu_a"));
    for (const auto& g : cfg.groups("phantom.inclusions")) {
      if (g.size() != 5) throw ConfigError("phantom.inclusions groups need 'x y radius mu_a diff'");
      for (int i = 0; i < grid.ny; ++i)
        for (int j = 0; j < grid.nz; ++j)
          if (std::hypot(i * grid.dy - g[0], j * grid.dz(geom) - g[1]) <= g[2]) f(i, j) = g[3];
    }
    Eigen::MatrixXd data, image;
    log.stage("measure", [&] {
      data = broken_ray_measure(f, grid, geom, over);
      if (cfg.str("noise.kind") != "none") {
        // diagonal noise drawn entrywise; the data are too many for a dense covariance
        const NoiseKind kind = noise_kind("noise.kind", cfg.str("noise.kind"));
        const double level = cfg.num("noise.level");
        std::mt19937_64 rng(noise_seed(cfg));
        std::normal_distribution<double> g;
        for (Eigen::Index k = 0; k < data.size(); ++k) {
          double& v = data.data()[k];
          const double sd = kind == NoiseKind::White      ? level
                            : kind == NoiseKind::Relative ? level * std::abs(v)
                                                          : level * std::sqrt(std::max(v, 0.0));
          v += sd * g(rng);
        }
      }
    });
    log.stage("invert", [&] {
      const double alpha = cfg.num("broken_ray.alpha");
      image = broken_ray_invert(data, grid, geom, alpha, broken_ray_calibrate(grid, geom, alpha, over));
    });
    log.stage("write", [&] {
      write_matrix_csv(image, (dir / "image.csv").string());
      write_matrix_csv(data, (dir / "measurements.csv").string());
      write_pgm(image.transpose(), (dir / "image.pgm").string());
      write_pgm(f.transpose(), (dir / "truth.pgm").string());
    });
    std::ostringstream rel;
    rel << "relative error: " << std::setprecision(6) << (image - f).norm() / f.norm();
    log.note(rel.str());
  } else if (method == "born") {
    Background bg;
    bg.mu_a = 1.0 / 3.0;
    bg.d0 = 1.0 / 3.0;
    bg.c = 1.0;
    BornGrid grid = BornGrid::cube(cfg.integer("born.per_side"), 1.0, Point3::Zero());
    const double reach = 0.5 * cfg.integer("born.per_side") + 2.5;
    grid.sources = sphere_points(24, reach, 0.0);
    grid.detectors = sphere_points(24, reach, 1.3);
    const BornOperator op(born_kernels(bg), grid, cfg.num("born.truncation"));
    Eigen::VectorXcd eta = Eigen::VectorXcd::Zero(grid.voxels.size());
    for (std::size_t v = 0; v < grid.voxels.size(); ++v)
      if (grid.voxels[v].norm() <= 1.0 + 1e-9) eta[v] = cfg.num("born.contrast") * bg.c * bg.mu_a;
    SeriesState series;
    log.stage("series", [&] { series = inverse_born_series(op.exact_data(eta), op, cfg.integer("born.order")); });
    log.stage("write", [&] {
      std::ofstream f(dir / "series.csv");
      f << std::setprecision(17) << "order,relative_error,norm\n";
      for (std::size_t j = 0; j < series.partial_sums.size(); ++j)
        f << j + 1 << ',' << (series.partial_sums[j] - eta).norm() / eta.norm() << ','
          << series.partial_sums[j].norm() << '\n';
      write_vector_csv(series.partial_sums.back().real(), (dir / "eta.csv").string(), "voxel", "eta");
    });
  } else if (method == "halfspace") {
    if (cfg.str("data.file").empty()) throw ConfigError("direct.method=halfspace needs data.file");
    HalfSpaceGrid grid;
    grid.n = cfg.integer("halfspace.n");
    grid.spacing = cfg.num("halfspace.spacing");
    grid.z = Eigen::VectorXd::LinSpaced(cfg.integer("halfspace.depth_samples"), 0.0, cfg.num("halfspace.depth_max"));
    Background bg;
    bg.mu_a = cfg.num("halfspace.mu_a");
    bg.d0 = cfg.num("halfspace.diff");
    bg.c = cfg.num("phantom.c");
    bg.omega = cfg.num("omega");
    bg.l_ext = cfg.num("halfspace.l_ext");
    HalfSpaceOptions o;
    o.alpha = cfg.num("halfspace.alpha");
    HalfSpaceImage img;
    log.stage("invert", [&] { img = fl_halfspace_invert(read_lattice(cfg.str("data.file"), grid.n), grid, bg, o); });
    log.stage("write", [&] {
      std::ofstream f(dir / "image.csv");
      f << std::setprecision(17) << "iz,i,j,z,mu_a,diff\n";
      for (int iz = 0; iz < grid.z.size(); ++iz)
        for (int i = 0; i < grid.n; ++i)
          for (int j = 0; j < grid.n; ++j)
            f << iz << ',' << i << ',' << j << ',' << grid.z[iz] << ',' << img.mu_a_at(iz, i, j) << ','
              << img.diff_at(iz, i, j) << '\n';
    });
  } else {
    throw ConfigError("direct.method must be broken_ray, born or halfspace");
  }
  log.write(dir);
  return 0;
}

int cmd_shape(const RunConfig& cfg, RunLog& log) {
  const fs::path dir = out_dir(cfg);
  const std::string& method = cfg.str("shape.method");
  Mesh mesh;
  std::shared_ptr<FemModel> model;
  Eigen::VectorXd y;
  log.stage("setup", [&] {
    mesh = make_mesh(cfg, "recon.h");
    model = make_model(cfg, mesh, Unknowns::Both);
    y = model->stack(read_data(data_path(cfg).string()));
  });
  const InclusionValues inc{cfg.num("shape.mu_a"), cfg.num("shape.diff")};
  if (method == "lm") {
    ShapeCoeffs start;
    const int order = cfg.integer("shape.order");
    if (order < 0) throw ConfigError("shape.order must be non-negative");
    start.gamma = Eigen::VectorXd::Zero(2 * order + 1);
    start.gamma[0] = cfg.num("shape.radius");
    const auto centre = cfg.groups("shape.center");
    if (centre.size() != 1 || centre[0].size() != 2) throw ConfigError("shape.center needs 'x y'");
    start.center = Eigen::Vector2d(centre[0][0], centre[0][1]);
    ShapeReconOptions o;
    o.max_iterations = cfg.integer("shape.iterations");
    o.lm_lambda = cfg.num("shape.lm_lambda");
    ShapeResult res;
    log.stage("solve", [&] { res = shape_reconstruct(*model, y, start, inc, o, recon_noise(cfg, y)); });
    log.stage("write", [&] {
      write_shape_coeffs(res.coeffs, (dir / "shape.csv").string());
      const auto poly = boundary_from_coeffs(res.coeffs, o.shape.n_points);
      std::ofstream f(dir / "boundary.csv");
      f << std::setprecision(17) << "x,y\n";
      for (const auto& p : poly) f << p.x() << ',' << p.y() << '\n';
      write_vector_csv(Eigen::Map<const Eigen::VectorXd>(res.misfits.data(), res.misfits.size()),
                       (dir / "report.csv").string(), "iteration", "misfit");
    });
    log.note("iterations: " + std::to_string(res.iterations) + " rejected " + std::to_string(res.rejected));
  } else if (method == "levelset") {
    std::vector<Eigen::Vector3d> circles;
    for (const auto& g : cfg.groups("levelset.circles")) {
      if (g.size() != 3) throw ConfigError("levelset.circles groups need 'x y radius'");
      circles.emplace_back(g[0], g[1], g[2]);
    }
    if (circles.empty()) throw ConfigError("levelset.circles is empty");
    LevelSetState st;
    st.phi_mu = circle_level_set(mesh, circles, cfg.num("levelset.cap"));
    st.phi_d = st.phi_mu;
    st.mu_int = inc.mu_a;
    st.d_int = inc.diff;
    st.mu_ext = cfg.num("phantom.mu_a");
    st.d_ext = cfg.num("phantom.diff");
    LevelSetOptions o;
    o.dt = cfg.num("levelset.dt");
    o.interior_dt = cfg.num("levelset.interior_dt");
    o.band = cfg.num("levelset.band");
    o.iterations = cfg.integer("levelset.iterations");
    LevelSetResult res;
    log.stage("solve", [&] { res = levelset_evolve(*model, y, st, o, recon_noise(cfg, y)); });
    log.stage("write", [&] {
      write_level_set(res.state, (dir / "level_set.csv").string());
      write_field_images(mesh, res.state.params(cfg.num("phantom.c")), dir / "levelset", cfg.integer("image.size"));
      write_vector_csv(Eigen::Map<const Eigen::VectorXd>(res.misfits.data(), res.misfits.size()),
                       (dir / "report.csv").string(), "step", "misfit");
    });
    std::vector<bool> mask(mesh.node_count());
    for (int v = 0; v < mesh.node_count(); ++v) mask[v] = res.state.phi_mu[v] <= 0.0;
    log.note("components: " + std::to_string(count_components(mesh, mask)));
  } else {
    throw ConfigError("shape.method must be lm or levelset");
  }
  log.write(dir);
  return 0;
}

// Statistics of fine(x) - coarse(x) for draws on the reconstruction mesh.
int cmd_aem(const RunConfig& cfg, RunLog& log) {
  const fs::path dir = out_dir(cfg);
  const Unknowns unknowns = make_unknowns(cfg);
  if (unknowns == Unknowns::Both) throw ConfigError("aem supports solver.unknowns absorption or diffusion");
  ApproxErrorStats stats;
  log.stage("sample", [&] {
    const Mesh fine = make_mesh(cfg);
    const Mesh coarse = cfg.str("recon.h").empty() ? build_disk_mesh(cfg.num("mesh.radius"), 2.0 * cfg.num("mesh.h"))
                                                   : make_mesh(cfg, "recon.h");
    auto fine_model = make_model(cfg, fine, unknowns);
    auto coarse_model = make_model(cfg, coarse, unknowns);
    const MappedModel mapped(fine_model, interpolation_matrix(coarse, fine));
    const Eigen::VectorXd mean = coarse_model->to_vector(coarse_model->background());
    const PriorModel prior = correlation_prior(coarse, mean, cfg.num("aem.sigma") * mean[0], cfg.num("aem.length"));
    stats = approximation_error(prior, mapped, *coarse_model, cfg.integer("aem.samples"), cfg.u64("seed"));
  });
  log.stage("write", [&] {
    write_approx_error(stats, (dir / "aem_mean.csv").string(), (dir / "aem_cov.csv").string());
  });
  log.note("samples: " + std::to_string(stats.samples));
  log.write(dir);
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Diffuse optical tomography pipelines", "difftomo"};
  app.require_subcommand(1);
  Flags flags;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"mesh", "build the disk mesh"},
      {"phantom", "rasterize the phantom onto the mesh"},
      {"simulate", "simulate boundary data, with optional noise"},
      {"reconstruct", "reconstruct optical parameters from data"},
      {"direct", "direct inversion (broken ray, Born series, half space)"},
      {"shape", "shape or level-set reconstruction of an inclusion"},
      {"aem", "approximation-error statistics between a fine and a coarse mesh"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", flags.config, "key=value config file");
    sub->add_option_function<std::uint64_t>(
        "--seed", [&flags](const std::uint64_t& s) { flags.seed = s, flags.seed_set = true; }, "random seed");
    sub->add_option("--threads", flags.threads, "worker thread cap")->check(CLI::PositiveNumber);
    sub->add_option("--out", flags.out, "output directory");
    sub->add_option("--solver", flags.solver, "solver name");
  }

  std::vector<std::string> argv_store = {"difftomo"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    const RunConfig cfg = load_config(flags);
    set_max_threads(cfg.integer("threads"));
    RunLog log(command, cfg);
    static const std::map<std::string, std::function<int(const RunConfig&, RunLog&)>> table = {
        {"mesh", cmd_mesh},       {"phantom", cmd_phantom}, {"simulate", cmd_simulate},
        {"reconstruct", cmd_reconstruct}, {"direct", cmd_direct}, {"shape", cmd_shape},
        {"aem", cmd_aem},
    };
    const int code = table.at(command)(cfg, log);
    out << command << ": wrote " << cfg.str("out") << '\n';
    return code;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace difftomo
