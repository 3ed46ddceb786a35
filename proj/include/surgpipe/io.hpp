/*!
 * Copyright (c) 2026 the surgpipe authors. All rights reserved.
 * Licensed under the Apache License 2.0. See LICENSE in the project root.
 */
#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "surgpipe/core.hpp"
#include "surgpipe/errors.hpp"

namespace surgpipe::io {

/// CAMT container: magic "CAMT", version u16 LE = 1, reserved u16 = 0,
/// then F, C, H, W as u32 LE and F*C*H*W float32 LE values in frame-major,
/// class-major, row-major order.
inline constexpr std::uint16_t kCamtVersion = 1;
inline constexpr std::size_t kCamtHeaderBytes = 4 + 2 + 2 + 4 * 4;
/// Refuse payloads beyond this many elements (4 GiB of floats).
inline constexpr std::uint64_t kCamtMaxElements = 1ull << 30;

namespace detail {

inline void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int shift = 0; shift < 32; shift += 8) {
    out.push_back(static_cast<char>((v >> shift) & 0xff));
  }
}

inline std::uint16_t get_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FormatError("cannot open file: " + path.string());
  }
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  return bytes;
}

inline void write_file_bytes(const std::filesystem::path& path,
                             const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw FormatError("cannot open file for writing: " + path.string());
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw FormatError("write failed: " + path.string());
  }
}

/// Shortest-width decimal that round-trips a double.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) {
    --e;
  }
  return s.substr(b, e - b);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      cells.push_back(trim(line.substr(start)));
      break;
    }
    cells.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return cells;
}

inline double parse_double(const std::string& cell,
                           const std::string& context) {
  if (cell.empty()) {
    throw FormatError(context + ": empty numeric cell");
  }
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (end != cell.c_str() + cell.size() || !std::isfinite(v)) {
    throw FormatError(context + ": bad numeric cell '" + cell + "'");
  }
  return v;
}

}  // namespace detail

inline void write_camt(const std::filesystem::path& path,
                       const HeatmapStack& stack) {
  std::string bytes;
  bytes.reserve(kCamtHeaderBytes + stack.data().size() * 4);
  bytes += "CAMT";
  detail::put_u16(bytes, kCamtVersion);
  detail::put_u16(bytes, 0);
  detail::put_u32(bytes, static_cast<std::uint32_t>(stack.frames()));
  detail::put_u32(bytes, static_cast<std::uint32_t>(stack.classes()));
  detail::put_u32(bytes, static_cast<std::uint32_t>(stack.height()));
  detail::put_u32(bytes, static_cast<std::uint32_t>(stack.width()));
  for (double v : stack.data()) {
    const auto f = static_cast<float>(v);
    if (!std::isfinite(f)) {
      throw FormatError("write_camt: non-finite value in payload");
    }
    detail::put_u32(bytes, std::bit_cast<std::uint32_t>(f));
  }
  detail::write_file_bytes(path, bytes);
}

inline HeatmapStack read_camt(const std::filesystem::path& path) {
  const std::string bytes = detail::read_file_bytes(path);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < kCamtHeaderBytes || bytes.compare(0, 4, "CAMT") != 0) {
    throw FormatError("invalid CAMT header: bad magic or short file");
  }
  if (detail::get_u16(p + 4) != kCamtVersion || detail::get_u16(p + 6) != 0) {
    throw FormatError("invalid CAMT header: unsupported version");
  }
  const std::uint32_t f = detail::get_u32(p + 8);
  const std::uint32_t c = detail::get_u32(p + 12);
  const std::uint32_t h = detail::get_u32(p + 16);
  const std::uint32_t w = detail::get_u32(p + 20);
  if (f == 0 || c == 0 || h == 0 || w == 0) {
    throw FormatError("invalid CAMT header: zero dimension");
  }
  const std::uint64_t count = static_cast<std::uint64_t>(f) * c * h * w;
  if (static_cast<std::uint64_t>(f) > kCamtMaxElements ||
      static_cast<std::uint64_t>(c) > kCamtMaxElements ||
      static_cast<std::uint64_t>(h) > kCamtMaxElements ||
      static_cast<std::uint64_t>(w) > kCamtMaxElements ||
      count > kCamtMaxElements) {
    throw FormatError("invalid CAMT header: payload too large");
  }
  if (bytes.size() != kCamtHeaderBytes + count * 4) {
    throw FormatError("CAMT payload length mismatch");
  }
  std::vector<double> values(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint32_t raw =
        detail::get_u32(p + kCamtHeaderBytes + i * 4);
    const auto fv = std::bit_cast<float>(raw);
    if (!std::isfinite(fv)) {
      throw FormatError("CAMT payload contains non-finite values");
    }
    values[i] = static_cast<double>(fv);
  }
  return HeatmapStack::from_data(f, c, h, w, std::move(values));
}

/// Detections document: class names plus per-frame boxes.
struct DetectionsDoc {
  std::vector<std::string> classes;
  std::vector<FrameDetections> frames;
};

/// Default class names class_0..class_{K-1}.
inline std::vector<std::string> default_class_names(std::size_t k) {
  std::vector<std::string> names(k);
  for (std::size_t c = 0; c < k; ++c) names[c] = "class_" + std::to_string(c);
  return names;
}

namespace detail {

inline void validate_doc(const DetectionsDoc& doc, const std::string& who) {
  for (std::size_t i = 1; i < doc.frames.size(); ++i) {
    if (doc.frames[i].frame_id <= doc.frames[i - 1].frame_id) {
      throw FormatError(who + ": frame_ids must be strictly increasing");
    }
  }
  for (const FrameDetections& f : doc.frames) {
    for (const Detection& d : f.detections) {
      if (d.class_id < 0 ||
          static_cast<std::size_t>(d.class_id) >= doc.classes.size()) {
        throw FormatError(who + ": class_id out of range");
      }
      if (!is_valid(d.box)) {
        throw FormatError(who + ": invalid box");
      }
      if (!std::isfinite(d.score)) {
        throw FormatError(who + ": non-finite score");
      }
    }
  }
}

}  // namespace detail

/// Writes the document as JSON. Frames without boxes are omitted; readers
/// treat absent frame_ids as empty frames.
inline void write_detections(const std::filesystem::path& path,
                             const DetectionsDoc& doc) {
  detail::validate_doc(doc, "write_detections");
  nlohmann::ordered_json root;
  root["classes"] = doc.classes;
  root["frames"] = nlohmann::ordered_json::array();
  for (const FrameDetections& f : doc.frames) {
    if (f.detections.empty()) continue;
    nlohmann::ordered_json frame;
    frame["frame_id"] = f.frame_id;
    frame["boxes"] = nlohmann::ordered_json::array();
    for (const Detection& d : f.detections) {
      nlohmann::ordered_json box;
      box["class_id"] = d.class_id;
      box["score"] = d.score;
      box["x_min"] = d.box.x_min;
      box["y_min"] = d.box.y_min;
      box["x_max"] = d.box.x_max;
      box["y_max"] = d.box.y_max;
      if (d.from_track) box["from_track"] = true;
      frame["boxes"].push_back(std::move(box));
    }
    root["frames"].push_back(std::move(frame));
  }
  detail::write_file_bytes(path, root.dump(2) + "\n");
}

inline DetectionsDoc read_detections(const std::filesystem::path& path) {
  const std::string bytes = detail::read_file_bytes(path);
  const nlohmann::json root = nlohmann::json::parse(bytes, nullptr, false);
  if (root.is_discarded() || !root.is_object()) {
    throw FormatError("read_detections: not a JSON object: " + path.string());
  }
  DetectionsDoc doc;
  try {
    if (!root.contains("classes") || !root["classes"].is_array()) {
      throw FormatError("read_detections: missing classes array");
    }
    for (const auto& name : root["classes"]) {
      doc.classes.push_back(name.get<std::string>());
    }
    if (!root.contains("frames") || !root["frames"].is_array()) {
      throw FormatError("read_detections: missing frames array");
    }
    for (const auto& frame : root["frames"]) {
      FrameDetections f;
      f.frame_id = frame.at("frame_id").get<std::int64_t>();
      for (const auto& box : frame.at("boxes")) {
        Detection d;
        d.class_id = box.at("class_id").get<int>();
        d.score = box.at("score").get<double>();
        d.box = BoundingBox{box.at("x_min").get<double>(),
                            box.at("y_min").get<double>(),
                            box.at("x_max").get<double>(),
                            box.at("y_max").get<double>()};
        d.from_track = box.value("from_track", false);
        f.detections.push_back(d);
      }
      doc.frames.push_back(std::move(f));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("read_detections: ") + e.what());
  }
  detail::validate_doc(doc, "read_detections");
  return doc;
}

/// Comma-separated matrix with header class_0,...,class_{K-1}.
inline void write_real_csv(const std::filesystem::path& path,
                           const RealMatrix& m) {
  std::string out;
  for (std::size_t c = 0; c < m.cols; ++c) {
    if (c > 0) out += ',';
    out += "class_" + std::to_string(c);
  }
  out += '\n';
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t c = 0; c < m.cols; ++c) {
      if (c > 0) out += ',';
      out += detail::format_double(m.at(r, c));
    }
    out += '\n';
  }
  detail::write_file_bytes(path, out);
}

inline void write_binary_csv(const std::filesystem::path& path,
                             const BinaryMatrix& m) {
  std::string out;
  for (std::size_t c = 0; c < m.cols; ++c) {
    if (c > 0) out += ',';
    out += "class_" + std::to_string(c);
  }
  out += '\n';
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t c = 0; c < m.cols; ++c) {
      if (c > 0) out += ',';
      out += m.at(r, c) ? '1' : '0';
    }
    out += '\n';
  }
  detail::write_file_bytes(path, out);
}

namespace detail {

inline std::vector<std::vector<std::string>> read_csv_cells(
    const std::filesystem::path& path, std::size_t* cols) {
  const std::string bytes = read_file_bytes(path);
  std::vector<std::vector<std::string>> rows;
  std::size_t start = 0;
  while (start < bytes.size()) {
    std::size_t nl = bytes.find('\n', start);
    if (nl == std::string::npos) nl = bytes.size();
    const std::string line = bytes.substr(start, nl - start);
    start = nl + 1;
    if (trim(line).empty()) continue;
    rows.push_back(split_csv_line(line));
  }
  if (rows.empty()) {
    throw FormatError("csv: empty file: " + path.string());
  }
  const std::vector<std::string>& header = rows.front();
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] != "class_" + std::to_string(c)) {
      throw FormatError("csv: bad header, expected class_0..class_{K-1}");
    }
  }
  *cols = header.size();
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != *cols) {
      throw FormatError("csv: row " + std::to_string(r) + " has " +
                        std::to_string(rows[r].size()) + " cells, expected " +
                        std::to_string(*cols));
    }
  }
  rows.erase(rows.begin());
  return rows;
}

}  // namespace detail

inline RealMatrix read_real_csv(const std::filesystem::path& path) {
  std::size_t cols = 0;
  const auto cells = detail::read_csv_cells(path, &cols);
  RealMatrix m = RealMatrix::zeros(cells.size(), cols);
  for (std::size_t r = 0; r < cells.size(); ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      m.at(r, c) = detail::parse_double(
          cells[r][c], "csv row " + std::to_string(r + 1));
    }
  }
  return m;
}

inline BinaryMatrix read_binary_csv(const std::filesystem::path& path) {
  std::size_t cols = 0;
  const auto cells = detail::read_csv_cells(path, &cols);
  BinaryMatrix m = BinaryMatrix::zeros(cells.size(), cols);
  for (std::size_t r = 0; r < cells.size(); ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const std::string& cell = cells[r][c];
      if (cell == "0") {
        m.at(r, c) = 0;
      } else if (cell == "1") {
        m.at(r, c) = 1;
      } else {
        throw FormatError("csv: label cell must be 0 or 1, got '" + cell +
                          "'");
      }
    }
  }
  return m;
}

}  // namespace surgpipe::io
