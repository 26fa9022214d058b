#include "convgame/names.hpp"

#include <limits>
#include <set>

#include "convgame/errors.hpp"

namespace convgame {

Name::Name(std::string token) : token_(std::move(token)) {
  if (token_.empty()) throw ConfigError("name token must be non-empty");
}

NamePool::NamePool(std::vector<std::string> tokens) {
  if (tokens.empty()) throw ConfigError("name pool must contain at least one name");
  if (tokens.size() > std::numeric_limits<std::uint16_t>::max()) {
    throw ConfigError("name pool is too large");
  }
  std::set<std::string> seen;
  names_.reserve(tokens.size());
  for (auto& t : tokens) {
    if (!seen.insert(t).second) throw ConfigError("duplicate name in pool: " + t);
    names_.emplace_back(std::move(t));
  }
}

NamePool::NamePool(std::initializer_list<const char*> tokens)
    : NamePool(std::vector<std::string>(tokens.begin(), tokens.end())) {}

const std::string& NamePool::token(NameId id) const {
  if (!contains(id)) {
    throw PoolMembershipError("name id " + std::to_string(index_of(id)) + " outside pool of size " +
                              std::to_string(names_.size()));
  }
  return names_[index_of(id)].token();
}

std::optional<NameId> NamePool::find(std::string_view token) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i].token() == token) return name_at(i);
  }
  return std::nullopt;
}

NameId NamePool::require(std::string_view token) const {
  if (auto id = find(token)) return *id;
  throw PoolMembershipError("name '" + std::string(token) + "' is not in the pool");
}

std::vector<NameId> NamePool::ids() const {
  std::vector<NameId> out;
  out.reserve(names_.size());
  for (std::size_t i = 0; i < names_.size(); ++i) out.push_back(name_at(i));
  return out;
}

std::vector<std::string> NamePool::tokens() const {
  std::vector<std::string> out;
  out.reserve(names_.size());
  for (const auto& n : names_) out.push_back(n.token());
  return out;
}

}  // namespace convgame
