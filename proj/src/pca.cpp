#include "hge/pca.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "hge/error.hpp"

namespace hge {

namespace {

// Returns the unit dominant eigenvector of the symmetric matrix `c`.
std::vector<double> dominant_eigenvector(const Matrix& c, std::span<const double> start, const PcaConfig& cfg) {
  const std::size_t d = c.rows();
  std::vector<double> v(start.begin(), start.end()), next(d);
  double n = norm(v);
  for (double& x : v) x /= n;
  for (std::size_t iter = 0; iter < cfg.max_iterations; ++iter) {
    matvec(c, v, next);
    n = norm(next);
    if (n == 0.0) return v;
    for (double& x : next) x /= n;
    double change = 0.0;
    for (std::size_t i = 0; i < d; ++i) change = std::max(change, std::abs(next[i] - v[i]));
    v.swap(next);
    if (change < cfg.tolerance) break;
  }
  return v;
}

void fix_sign(std::span<double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (std::abs(v[i]) > std::abs(v[best])) best = i;
  }
  if (v[best] < 0.0) {
    for (double& x : v) x = -x;
  }
}

double rayleigh(const Matrix& c, std::span<const double> v) {
  std::vector<double> cv(v.size());
  matvec(c, v, cv);
  return dot(v, cv);
}

}  // namespace

Projection project_pca(const EmbeddingTable& table, const PcaConfig& cfg) {
  const std::size_t n = table.size(), d = table.dim();
  if (n < 2) throw InvalidArgument("pca: need at least 2 entities");
  if (d < 2) throw InvalidArgument("pca: need dimension >= 2");

  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) axpy(1.0, table.row(i), mean);
  for (double& m : mean) m /= static_cast<double>(n);
  Matrix centered(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = table.row(i);
    for (std::size_t k = 0; k < d; ++k) centered(i, k) = r[k] - mean[k];
  }
  Matrix cov(d, d);
  for (std::size_t i = 0; i < n; ++i) add_outer(1.0 / static_cast<double>(n), centered.row(i), centered.row(i), cov);

  double trace = 0.0, scale = 0.0;
  for (std::size_t k = 0; k < d; ++k) trace += cov(k, k);
  for (double m : mean) scale = std::max(scale, std::abs(m));
  for (double x : centered.data()) scale = std::max(scale, std::abs(x));
  if (!(trace > 1e-24 * std::max(1.0, scale * scale))) throw InvalidArgument("pca: data has rank 0 (all rows equal)");

  Projection out;
  out.ids = table.ids();
  out.components = Matrix(2, d);

  // Start from the largest-variance coordinate direction plus a uniform tilt.
  std::vector<double> start(d, 1.0 / std::sqrt(static_cast<double>(d)));
  std::size_t widest = 0;
  for (std::size_t k = 1; k < d; ++k) {
    if (cov(k, k) > cov(widest, widest)) widest = k;
  }
  start[widest] += 1.0;
  std::vector<double> v1 = dominant_eigenvector(cov, start, cfg);
  fix_sign(v1);
  const double l1 = rayleigh(cov, v1);

  Matrix deflated = cov;
  add_outer(-l1, v1, v1, deflated);
  // Start orthogonal to v1.
  std::vector<double> start2(d);
  for (std::size_t k = 0; k < d; ++k) start2[k] = (k % 2 == 0 ? 1.0 : -0.5) + 0.01 * static_cast<double>(k);
  axpy(-dot(start2, v1), v1, start2);
  std::vector<double> v2 = dominant_eigenvector(deflated, start2, cfg);
  // Re-orthogonalize against drift.
  axpy(-dot(v2, v1), v1, v2);
  const double n2 = norm(v2);
  for (double& x : v2) x /= n2;
  fix_sign(v2);
  double l2 = rayleigh(cov, v2);
  if (l2 < 0.0) l2 = 0.0;

  std::copy(v1.begin(), v1.end(), out.components.row(0).begin());
  std::copy(v2.begin(), v2.end(), out.components.row(1).begin());
  out.eigenvalues = {l1, l2};
  out.coords = Matrix(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    out.coords(i, 0) = dot(centered.row(i), v1);
    out.coords(i, 1) = dot(centered.row(i), v2);
  }
  return out;
}

void save_projection_csv(const std::filesystem::path& path, const Projection& projection) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "id,x,y\n";
  for (std::size_t i = 0; i < projection.ids.size(); ++i) {
    out << projection.ids[i] << ',' << format_double(projection.coords(i, 0)) << ','
        << format_double(projection.coords(i, 1)) << '\n';
  }
  if (!out) throw IoError("write failure on " + path.string());
}

namespace {

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

}  // namespace

void save_projection_svg(const std::filesystem::path& path, const Projection& projection,
                         const std::map<std::string, std::string>& groups, const std::string& title) {
  constexpr double kSize = 600.0, kMargin = 40.0;
  const std::size_t n = projection.ids.size();
  double min_x = 0, max_x = 0, min_y = 0, max_y = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = projection.coords(i, 0), y = projection.coords(i, 1);
    if (i == 0 || x < min_x) min_x = x;
    if (i == 0 || x > max_x) max_x = x;
    if (i == 0 || y < min_y) min_y = y;
    if (i == 0 || y > max_y) max_y = y;
  }
  const double span_x = max_x > min_x ? max_x - min_x : 1.0;
  const double span_y = max_y > min_y ? max_y - min_y : 1.0;

  std::set<std::string> names;
  for (const auto& id : projection.ids) {
    if (auto it = groups.find(id); it != groups.end()) names.insert(it->second);
  }
  std::map<std::string, std::size_t> color;
  for (const auto& g : names) color.emplace(g, color.size());

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  char buf[256];
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kSize << "\" height=\"" << kSize
      << "\" viewBox=\"0 0 " << kSize << ' ' << kSize << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kSize / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">"
      << xml_escape(title) << "</text>\n";
  for (std::size_t i = 0; i < n; ++i) {
    const double px = kMargin + (projection.coords(i, 0) - min_x) / span_x * (kSize - 2 * kMargin);
    const double py = kSize - kMargin - (projection.coords(i, 1) - min_y) / span_y * (kSize - 2 * kMargin);
    const auto it = groups.find(projection.ids[i]);
    const char* fill = it == groups.end() ? "#444444" : kPalette[color[it->second] % std::size(kPalette)];
    std::snprintf(buf, sizeof buf, "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"4\" fill=\"%s\" fill-opacity=\"0.8\">", px, py,
                  fill);
    out << buf << "<title>" << xml_escape(projection.ids[i]);
    if (it != groups.end()) out << " (" << xml_escape(it->second) << ")";
    out << "</title></circle>\n";
  }
  double legend_y = 44.0;
  for (const auto& [name, index] : color) {
    std::snprintf(buf, sizeof buf, "<circle cx=\"%.1f\" cy=\"%.1f\" r=\"5\" fill=\"%s\"/>", kSize - 110.0, legend_y,
                  kPalette[index % std::size(kPalette)]);
    out << buf << "<text x=\"" << kSize - 100.0 << "\" y=\"" << legend_y + 4.0
        << "\" font-family=\"sans-serif\" font-size=\"12\">" << xml_escape(name) << "</text>\n";
    legend_y += 16.0;
  }
  out << "</svg>\n";
  if (!out) throw IoError("write failure on " + path.string());
}

}  // namespace hge
