#pragma once

#include <functional>
#include <optional>
#include <string>

namespace r2kg {

// Query-time marker for traversing an edge tail-to-head. Never stored.
inline constexpr char kInverseMarker = '~';

// One KG edge: a triple, or a temporal quintuple with validity years.
struct Fact {
    std::string head;
    std::string relation;
    std::string tail;
    std::optional<int> start_time;
    std::optional<int> end_time;

    bool is_temporal() const { return start_time.has_value(); }

    bool operator==(const Fact& other) const {
        return head == other.head && relation == other.relation && tail == other.tail &&
               start_time == other.start_time && end_time == other.end_time;
    }

    // Rendering used everywhere a fact faces an agent: [h, r, t] or [h, r, t, s, e].
    std::string to_bracket_string() const {
        std::string out = "[" + head + ", " + relation + ", " + tail;
        if (is_temporal()) {
            out += ", " + std::to_string(*start_time) + ", " + std::to_string(*end_time);
        }
        out += "]";
        return out;
    }
};

struct FactHash {
    std::size_t operator()(const Fact& f) const {
        std::size_t h = std::hash<std::string>{}(f.head);
        auto mix = [&h](std::size_t v) { h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2); };
        mix(std::hash<std::string>{}(f.relation));
        mix(std::hash<std::string>{}(f.tail));
        mix(std::hash<long>{}(f.start_time.value_or(1 << 30)));
        mix(std::hash<long>{}(f.end_time.value_or(1 << 30)));
        return h;
    }
};

} // namespace r2kg
