#include "hge/embedding.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "hge/error.hpp"

namespace hge {

std::string_view to_string(EntityType type) {
  switch (type) {
    case EntityType::service: return "service";
    case EntityType::doctor: return "doctor";
    case EntityType::patient: return "patient";
    case EntityType::hybrid: return "hybrid";
  }
  return "unknown";
}

EmbeddingTable::EmbeddingTable(EntityType type, std::vector<std::string> ids, Matrix vectors)
    : type_(type), ids_(std::move(ids)), vectors_(std::move(vectors)) {
  if (ids_.size() != vectors_.rows()) {
    throw InvalidArgument("embedding table: " + std::to_string(ids_.size()) + " ids for " +
                          std::to_string(vectors_.rows()) + " rows");
  }
  for (double v : vectors_.data()) {
    if (!std::isfinite(v)) throw InvalidArgument("embedding table: non-finite entry");
  }
  index_.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!index_.emplace(ids_[i], i).second) throw InvalidArgument("embedding table: duplicate id " + ids_[i]);
  }
}

std::optional<std::size_t> EmbeddingTable::find(std::string_view id) const {
  const auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::span<const double> EmbeddingTable::at(std::string_view id) const {
  const auto i = find(id);
  if (!i) throw InvalidArgument(std::string(to_string(type_)) + " embedding missing for " + std::string(id));
  return row(*i);
}

EmbeddingTable EmbeddingTable::select(std::span<const std::string> ids) const {
  Matrix m(ids.size(), dim());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto src = at(ids[i]);
    std::copy(src.begin(), src.end(), m.row(i).begin());
  }
  return EmbeddingTable(type_, std::vector<std::string>(ids.begin(), ids.end()), std::move(m));
}

std::string format_double(double value) {
  char buf[64];
  const auto result = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, result.ptr);
}

void save_embeddings(const std::filesystem::path& path, const EmbeddingTable& table) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << table.size() << ' ' << table.dim() << '\n';
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (table.ids()[i].find_first_of(" \t\n\r") != std::string::npos) {
      throw InvalidArgument("embedding id contains whitespace: " + table.ids()[i]);
    }
    out << table.ids()[i];
    for (double v : table.row(i)) out << ' ' << format_double(v);
    out << '\n';
  }
  if (!out) throw IoError("write failure on " + path.string());
}

EmbeddingTable load_embeddings(const std::filesystem::path& path, EntityType type) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string source = path.string();
  std::string line;
  if (!std::getline(in, line)) throw ParseError(source, 1, "empty file");
  std::size_t count = 0, dim = 0;
  {
    std::istringstream header(line);
    if (!(header >> count >> dim)) throw ParseError(source, 1, "header must be '<count> <dim>'");
  }
  std::vector<std::string> ids;
  ids.reserve(count);
  Matrix m(count, dim);
  for (std::size_t r = 0; r < count; ++r) {
    if (!std::getline(in, line)) throw ParseError(source, r + 2, "expected " + std::to_string(count) + " rows");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const char* p = line.data();
    const char* end = p + line.size();
    const char* id_end = p;
    while (id_end != end && *id_end != ' ') ++id_end;
    ids.emplace_back(p, id_end);
    if (ids.back().empty()) throw ParseError(source, r + 2, "empty id");
    p = id_end;
    for (std::size_t c = 0; c < dim; ++c) {
      if (p == end || *p != ' ') throw ParseError(source, r + 2, "expected " + std::to_string(dim) + " values");
      ++p;
      double v = 0.0;
      const auto res = std::from_chars(p, end, v);
      if (res.ec != std::errc()) throw ParseError(source, r + 2, "invalid number");
      m(r, c) = v;
      p = res.ptr;
    }
    if (p != end) throw ParseError(source, r + 2, "trailing characters");
  }
  try {
    return EmbeddingTable(type, std::move(ids), std::move(m));
  } catch (const InvalidArgument& e) {
    throw ParseError(source, 1, e.what());
  }
}

EmbeddingTable concatenate(const EmbeddingTable& a, const EmbeddingTable& b) {
  std::vector<std::string> ids;
  for (const auto& id : a.ids()) {
    if (b.contains(id)) ids.push_back(id);
  }
  Matrix m(ids.size(), a.dim() + b.dim());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto ra = a.at(ids[i]);
    const auto rb = b.at(ids[i]);
    auto out = m.row(i);
    std::copy(ra.begin(), ra.end(), out.begin());
    std::copy(rb.begin(), rb.end(), out.begin() + static_cast<std::ptrdiff_t>(a.dim()));
  }
  return EmbeddingTable(a.type(), std::move(ids), std::move(m));
}

}  // namespace hge
