#pragma once

#include <optional>
#include <string>
#include <vector>

#include "error.hpp"

namespace diffsym {

inline bool valid_identifier(const std::string& s) {
    if (s.empty()) return false;
    if (!(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
    for (char c : s)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
    return true;
}

// Coordinates on the extended state space: index 0 is time, 1..m are spatial.
class CoordinateSystem {
public:
    CoordinateSystem() = default;

    explicit CoordinateSystem(std::vector<std::string> spatial, std::string time = "t") {
        if (spatial.empty()) throw DimensionMismatch("need at least one spatial coordinate");
        names_.reserve(spatial.size() + 1);
        names_.push_back(std::move(time));
        for (auto& s : spatial) names_.push_back(std::move(s));
        for (std::size_t i = 0; i < names_.size(); ++i) {
            if (!valid_identifier(names_[i]))
                throw DimensionMismatch("invalid coordinate name '" + names_[i] + "'");
            for (std::size_t j = 0; j < i; ++j)
                if (names_[i] == names_[j])
                    throw DimensionMismatch("duplicate coordinate name '" + names_[i] + "'");
        }
    }

    // Spatial dimension m; the extended space has m+1 coordinates.
    std::size_t dim() const { return names_.size() - 1; }
    std::size_t size() const { return names_.size(); }

    const std::string& name(std::size_t i) const { return names_.at(i); }
    const std::string& time() const { return names_.at(0); }

    std::optional<std::size_t> index(const std::string& n) const {
        for (std::size_t i = 0; i < names_.size(); ++i)
            if (names_[i] == n) return i;
        return std::nullopt;
    }

    bool contains(const std::string& n) const { return index(n).has_value(); }

    const std::vector<std::string>& names() const { return names_; }

    std::vector<std::string> spatial_names() const {
        return {names_.begin() + 1, names_.end()};
    }

    bool operator==(const CoordinateSystem& o) const { return names_ == o.names_; }

private:
    std::vector<std::string> names_;
};

}  // namespace diffsym
