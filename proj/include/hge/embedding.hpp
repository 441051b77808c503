#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hge/linalg.hpp"

namespace hge {

enum class EntityType { service, doctor, patient, hybrid };

std::string_view to_string(EntityType type);

// Id-indexed matrix of vectors for one entity type. Ids are unique; rows
// share one dimension; entries are finite.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(EntityType type, std::vector<std::string> ids, Matrix vectors);

  EntityType type() const { return type_; }
  std::size_t size() const { return ids_.size(); }
  std::size_t dim() const { return vectors_.cols(); }
  bool empty() const { return ids_.empty(); }

  const std::vector<std::string>& ids() const { return ids_; }
  const Matrix& vectors() const { return vectors_; }

  std::span<const double> row(std::size_t i) const { return vectors_.row(i); }
  std::optional<std::size_t> find(std::string_view id) const;
  bool contains(std::string_view id) const { return find(id).has_value(); }
  // Throws InvalidArgument for unknown ids.
  std::span<const double> at(std::string_view id) const;

  // Rows for `ids`, in that order. Throws on unknown ids.
  EmbeddingTable select(std::span<const std::string> ids) const;

  bool operator==(const EmbeddingTable& other) const {
    return type_ == other.type_ && ids_ == other.ids_ && vectors_ == other.vectors_;
  }

 private:
  EntityType type_ = EntityType::service;
  std::vector<std::string> ids_;
  Matrix vectors_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Text format: `<count> <dim>` header, then `<id> <v1> ... <vdim>` per row.
// Values use the shortest round-trip decimal representation.
void save_embeddings(const std::filesystem::path& path, const EmbeddingTable& table);
EmbeddingTable load_embeddings(const std::filesystem::path& path, EntityType type);

// Shortest decimal string that parses back to exactly `value`.
std::string format_double(double value);

// Rows are concatenated per id present in both tables, ordered as in `a`.
EmbeddingTable concatenate(const EmbeddingTable& a, const EmbeddingTable& b);

}  // namespace hge
