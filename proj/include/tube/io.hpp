// Bit-exact file formats:
//   - binary masks: PGM (P5, maxval 255), foreground encoded as 255
//   - probability maps: GMF1, a little-endian float32 raster
//   - graphs: JSON {"height", "width", "nodes": [[row,col]...],
//     "edges": [[i,j]...]}, and windowed-graph JSON as a list of
//     {"origin": [row,col], "graph": {...}}
// Node coordinates are stored as (row, col); callers working in (x, y)
// must map x -> col and y -> row at this boundary.
#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tube/graph.hpp"
#include "tube/raster.hpp"

namespace tube {

namespace detail {

inline void skip_pgm_whitespace(std::string_view s, size_t& i) {
  while (i < s.size()) {
    if (s[i] == '#') {  // comment runs to end of line
      while (i < s.size() && s[i] != '\n') ++i;
    } else if (s[i] == ' ' || s[i] == '\t' || s[i] == '\r' || s[i] == '\n') {
      ++i;
    } else {
      break;
    }
  }
}

inline long parse_pgm_int(std::string_view s, size_t& i, const char* field) {
  skip_pgm_whitespace(s, i);
  if (i >= s.size() || s[i] < '0' || s[i] > '9') {
    throw FormatError(std::string("pgm: malformed header, expected ") + field);
  }
  long v = 0;
  while (i < s.size() && s[i] >= '0' && s[i] <= '9') {
    v = v * 10 + (s[i] - '0');
    if (v > 1'000'000'000L) throw FormatError(std::string("pgm: ") + field + " too large");
    ++i;
  }
  return v;
}

inline void put_u32le(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

inline std::uint32_t get_u32le(std::string_view s, size_t off) {
  return static_cast<std::uint32_t>(static_cast<unsigned char>(s[off])) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(s[off + 1])) << 8) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(s[off + 2])) << 16) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(s[off + 3])) << 24);
}

}  // namespace detail

// Reads a P5 PGM with maxval 255. Pixels > 127 map to foreground.
inline Mask read_binary_pgm(std::string_view bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
    throw FormatError("pgm: missing P5 magic");
  }
  size_t i = 2;
  const long width = detail::parse_pgm_int(bytes, i, "width");
  const long height = detail::parse_pgm_int(bytes, i, "height");
  const long maxval = detail::parse_pgm_int(bytes, i, "maxval");
  if (width < 1 || height < 1) throw FormatError("pgm: non-positive dimensions");
  if (maxval != 255) {
    throw FormatError("pgm: maxval must be 255, got " + std::to_string(maxval));
  }
  if (i >= bytes.size()) throw FormatError("pgm: truncated payload");
  ++i;  // single whitespace byte after maxval
  const size_t need = static_cast<size_t>(width) * static_cast<size_t>(height);
  if (bytes.size() - i < need) throw FormatError("pgm: truncated payload");
  std::vector<std::uint8_t> v(need);
  for (size_t k = 0; k < need; ++k) {
    v[k] = static_cast<unsigned char>(bytes[i + k]) > 127 ? 1 : 0;
  }
  return Mask::from_values(static_cast<int>(height), static_cast<int>(width),
                           std::move(v));
}

inline std::string write_binary_pgm(const Mask& m) {
  std::string out = "P5\n" + std::to_string(m.cols()) + " " +
                    std::to_string(m.rows()) + "\n255\n";
  out.reserve(out.size() + m.size());
  for (auto v : m.values()) out.push_back(v ? static_cast<char>(255) : 0);
  return out;
}

// GMF1: "GMF1", u32le height, u32le width, then height*width float32le
// values in row-major order, each in [0, 1].
inline ProbMap read_float_map(std::string_view bytes) {
  if (bytes.size() < 4 || bytes.substr(0, 4) != "GMF1") {
    throw FormatError("gmf: bad magic");
  }
  if (bytes.size() < 12) throw FormatError("gmf: truncated header");
  const std::uint32_t height = detail::get_u32le(bytes, 4);
  const std::uint32_t width = detail::get_u32le(bytes, 8);
  if (height < 1 || width < 1) throw FormatError("gmf: non-positive dimensions");
  const size_t need = static_cast<size_t>(height) * width;
  if (bytes.size() - 12 < need * 4) throw FormatError("gmf: truncated payload");
  std::vector<float> v(need);
  static_assert(sizeof(float) == 4);
  std::memcpy(v.data(), bytes.data() + 12, need * 4);
  for (size_t k = 0; k < need; ++k) {
    if (!(v[k] >= 0.0f && v[k] <= 1.0f)) {
      throw FormatError("gmf: value outside [0, 1] at index " +
                        std::to_string(k));
    }
  }
  return ProbMap::from_values(static_cast<int>(height), static_cast<int>(width),
                              std::move(v));
}

inline std::string write_float_map(const ProbMap& p) {
  std::string out = "GMF1";
  detail::put_u32le(out, static_cast<std::uint32_t>(p.rows()));
  detail::put_u32le(out, static_cast<std::uint32_t>(p.cols()));
  const size_t n = p.size();
  out.resize(12 + n * 4);
  std::memcpy(out.data() + 12, p.values().data(), n * 4);
  return out;
}

// Graph JSON. Coordinates may be fractional; edges are canonicalised
// (i < j, lexicographically sorted) on write.
inline TubeGraph graph_from_json(const nlohmann::json& j) {
  TubeGraph g;
  try {
    g.height = j.at("height").get<int>();
    g.width = j.at("width").get<int>();
    for (const auto& n : j.at("nodes")) {
      if (!n.is_array() || n.size() != 2) {
        throw FormatError("graph json: node must be [row, col]");
      }
      g.nodes.push_back({n[0].get<double>(), n[1].get<double>()});
    }
    for (const auto& e : j.at("edges")) {
      if (!e.is_array() || e.size() != 2) {
        throw FormatError("graph json: edge must be [i, j]");
      }
      g.edges.emplace_back(e[0].get<int>(), e[1].get<int>());
    }
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("graph json: ") + ex.what());
  }
  try {
    g.validate();
  } catch (const std::invalid_argument& ex) {
    throw FormatError(std::string("graph json: ") + ex.what());
  }
  return g;
}

inline TubeGraph read_graph_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("graph json: ") + ex.what());
  }
  return graph_from_json(j);
}

inline nlohmann::ordered_json graph_to_json(const TubeGraph& g) {
  TubeGraph c = g;
  c.canonicalize();
  nlohmann::ordered_json j;
  j["height"] = c.height;
  j["width"] = c.width;
  j["nodes"] = nlohmann::ordered_json::array();
  for (const auto& n : c.nodes) j["nodes"].push_back({n.row, n.col});
  j["edges"] = nlohmann::ordered_json::array();
  for (const auto& e : c.edges) j["edges"].push_back({e.first, e.second});
  return j;
}

inline std::string write_graph_json(const TubeGraph& g) {
  return graph_to_json(g).dump();
}

// One window of a tiled image: a graph whose coordinates are local to a
// window whose top-left corner sits at `origin` in the full raster.
struct WindowItem {
  Coord origin;
  TubeGraph graph;
};

using WindowedGraphs = std::vector<WindowItem>;

inline WindowedGraphs read_windowed_graphs(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("windowed graph json: ") + ex.what());
  }
  if (!j.is_array()) throw FormatError("windowed graph json: expected a list");
  WindowedGraphs out;
  for (const auto& item : j) {
    WindowItem w;
    try {
      const auto& o = item.at("origin");
      if (!o.is_array() || o.size() != 2) {
        throw FormatError("windowed graph json: origin must be [row, col]");
      }
      w.origin = {o[0].get<int>(), o[1].get<int>()};
      w.graph = graph_from_json(item.at("graph"));
    } catch (const nlohmann::json::exception& ex) {
      throw FormatError(std::string("windowed graph json: ") + ex.what());
    }
    if (w.origin.row < 0 || w.origin.col < 0) {
      throw FormatError("windowed graph json: negative origin");
    }
    out.push_back(std::move(w));
  }
  return out;
}

inline std::string write_windowed_graphs(const WindowedGraphs& wg) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& w : wg) {
    nlohmann::ordered_json item;
    item["origin"] = {w.origin.row, w.origin.col};
    item["graph"] = graph_to_json(w.graph);
    j.push_back(std::move(item));
  }
  return j.dump();
}

}  // namespace tube
