#include "difftomo/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "difftomo/error.hpp"

namespace difftomo {

namespace {

std::vector<double> parse_row(std::string line, const std::string& path) {
  std::replace(line.begin(), line.end(), ',', ' ');
  std::istringstream ss(line);
  std::vector<double> out;
  std::string tok;
  while (ss >> tok) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    require(used == tok.size(), ErrorKind::InvalidData, "bad number '" + tok + "' in " + path);
    out.push_back(v);
  }
  return out;
}

}  // namespace

void write_matrix_csv(const Eigen::MatrixXd& m, const std::string& path) {
  std::ofstream f(path);
  require(f.good(), ErrorKind::InvalidArgument, "cannot open " + path);
  f << std::setprecision(17);
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) f << (c ? "," : "") << m(r, c);
    f << '\n';
  }
}

Eigen::MatrixXd read_matrix_csv(const std::string& path) {
  std::ifstream f(path);
  require(f.good(), ErrorKind::InvalidArgument, "cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    rows.push_back(parse_row(line, path));
    require(rows.back().size() == rows.front().size(), ErrorKind::InvalidData,
            "ragged rows in " + path);
  }
  const int nr = static_cast<int>(rows.size());
  const int nc = nr ? static_cast<int>(rows[0].size()) : 0;
  Eigen::MatrixXd m(nr, nc);
  for (int r = 0; r < nr; ++r)
    for (int c = 0; c < nc; ++c) m(r, c) = rows[r][c];
  return m;
}

void write_vector_csv(const Eigen::VectorXd& v, const std::string& path,
                      const std::string& index_name, const std::string& value_name) {
  std::ofstream f(path);
  require(f.good(), ErrorKind::InvalidArgument, "cannot open " + path);
  f << std::setprecision(17) << index_name << ',' << value_name << '\n';
  for (int i = 0; i < v.size(); ++i) f << i << ',' << v[i] << '\n';
}

Eigen::VectorXd read_vector_csv(const std::string& path) {
  std::ifstream f(path);
  require(f.good(), ErrorKind::InvalidArgument, "cannot open " + path);
  std::string line;
  std::getline(f, line);
  std::vector<double> vals;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto row = parse_row(line, path);
    require(row.size() == 2 && row[0] == static_cast<double>(vals.size()), ErrorKind::InvalidData,
            "bad row '" + line + "' in " + path);
    vals.push_back(row[1]);
  }
  return Eigen::Map<Eigen::VectorXd>(vals.data(), vals.size());
}

void write_pgm(const Eigen::MatrixXd& image, const std::string& path) {
  require(image.size() > 0 && image.allFinite(), ErrorKind::InvalidData, "image must be finite and non-empty");
  const double lo = image.minCoeff(), hi = image.maxCoeff();
  const double span = hi > lo ? hi - lo : 1.0;
  std::ofstream f(path, std::ios::binary);
  require(f.good(), ErrorKind::InvalidArgument, "cannot open " + path);
  f << "P5\n" << image.cols() << ' ' << image.rows() << "\n255\n";
  for (int r = 0; r < image.rows(); ++r)
    for (int c = 0; c < image.cols(); ++c) {
      const long v = std::lround(255.0 * (image(r, c) - lo) / span);
      f.put(static_cast<char>(static_cast<unsigned char>(std::clamp(v, 0L, 255L))));
    }
  std::ofstream s(path + ".scale");
  require(s.good(), ErrorKind::InvalidArgument, "cannot open " + path + ".scale");
  s << std::setprecision(17) << lo << ',' << hi << '\n';
}

Eigen::MatrixXd read_pgm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), ErrorKind::InvalidArgument, "cannot open " + path);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  f >> magic >> w >> h >> maxval;
  require(magic == "P5" && w > 0 && h > 0 && maxval == 255, ErrorKind::InvalidData, "unsupported PGM " + path);
  f.get();
  std::ifstream s(path + ".scale");
  double lo = 0.0, hi = 255.0;
  if (s.good()) {
    const auto v = parse_row([&] { std::string l; std::getline(s, l); return l; }(), path + ".scale");
    require(v.size() == 2, ErrorKind::InvalidData, "bad scale file for " + path);
    lo = v[0];
    hi = v[1];
  }
  const double span = hi > lo ? hi - lo : 255.0;
  Eigen::MatrixXd img(h, w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const int byte = f.get();
      require(byte != EOF, ErrorKind::InvalidData, "truncated PGM " + path);
      img(r, c) = lo + span * byte / 255.0;
    }
  return img;
}

}  // namespace difftomo
