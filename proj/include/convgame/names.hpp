#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace convgame {

/// Position of a name in its pool's canonical order.
enum class NameId : std::uint16_t {};

constexpr std::size_t index_of(NameId id) { return static_cast<std::size_t>(id); }
constexpr NameId name_at(std::size_t i) { return static_cast<NameId>(i); }

/// An opaque convention token. Equality is exact text equality.
class Name {
 public:
  explicit Name(std::string token);

  const std::string& token() const { return token_; }

  friend bool operator==(const Name&, const Name&) = default;
  friend auto operator<=>(const Name&, const Name&) = default;

 private:
  std::string token_;
};

/// Ordered set of distinct candidate names for one trial.
///
/// A trial requires at least two names; TrialConfig enforces that. The pool
/// itself accepts a single name so degenerate presentation cases stay
/// expressible.
class NamePool {
 public:
  explicit NamePool(std::vector<std::string> tokens);
  NamePool(std::initializer_list<const char*> tokens);

  std::size_t size() const { return names_.size(); }
  const std::vector<Name>& names() const { return names_; }
  const std::string& token(NameId id) const;

  bool contains(NameId id) const { return index_of(id) < names_.size(); }
  std::optional<NameId> find(std::string_view token) const;
  /// Throws PoolMembershipError when absent.
  NameId require(std::string_view token) const;

  std::vector<NameId> ids() const;
  std::vector<std::string> tokens() const;

  friend bool operator==(const NamePool&, const NamePool&) = default;

 private:
  std::vector<Name> names_;
};

}  // namespace convgame
