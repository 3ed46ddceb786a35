/*!
 * Copyright (c) 2026 the surgpipe authors. All rights reserved.
 * Licensed under the Apache License 2.0. See LICENSE in the project root.
 */
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "catch2/catch_amalgamated.hpp"
#include "surgpipe/errors.hpp"
#include "surgpipe/io.hpp"

using namespace surgpipe;
using namespace surgpipe::io;

namespace {

std::filesystem::path scratch_dir() {
  const auto dir = std::filesystem::temp_directory_path() / "surgpipe_io_tests";
  std::filesystem::create_directories(dir);
  return dir;
}

void write_raw(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int shift = 0; shift < 32; shift += 8) {
    out.push_back(static_cast<char>((v >> shift) & 0xff));
  }
}

/// Minimal valid header for a 1x1x1xW file.
std::string camt_header(std::uint32_t f, std::uint32_t c, std::uint32_t h,
                        std::uint32_t w, std::uint16_t version = 1) {
  std::string bytes = "CAMT";
  put_u16(bytes, version);
  put_u16(bytes, 0);
  put_u32(bytes, f);
  put_u32(bytes, c);
  put_u32(bytes, h);
  put_u32(bytes, w);
  return bytes;
}

}  // namespace

TEST_CASE("camt round-trips through float32") {
  std::mt19937_64 rng(109);
  std::uniform_real_distribution<double> value(-2.0, 3.0);
  HeatmapStack stack(3, 2, 5, 7);
  for (double& v : stack.data()) v = value(rng);

  const auto path = scratch_dir() / "roundtrip.camt";
  write_camt(path, stack);
  const HeatmapStack loaded = read_camt(path);

  REQUIRE(loaded.same_shape(stack));
  for (std::size_t i = 0; i < stack.data().size(); ++i) {
    // Storage is float32: the loaded value is the narrowed original.
    CHECK(loaded.data()[i] ==
          static_cast<double>(static_cast<float>(stack.data()[i])));
  }
}

TEST_CASE("camt header validation") {
  const auto dir = scratch_dir();

  const auto truncated = dir / "truncated.camt";
  write_raw(truncated, "CAMT\x01");
  CHECK_THROWS_MATCHES(
      read_camt(truncated), FormatError,
      Catch::Matchers::MessageMatches(
          Catch::Matchers::ContainsSubstring("invalid CAMT header")));

  const auto magic = dir / "magic.camt";
  std::string bad = camt_header(1, 1, 1, 1);
  bad[0] = 'X';
  put_u32(bad, 0);
  write_raw(magic, bad);
  CHECK_THROWS_MATCHES(
      read_camt(magic), FormatError,
      Catch::Matchers::MessageMatches(
          Catch::Matchers::ContainsSubstring("bad magic")));

  const auto version = dir / "version.camt";
  std::string v2 = camt_header(1, 1, 1, 1, 9);
  put_u32(v2, 0);
  write_raw(version, v2);
  CHECK_THROWS_MATCHES(
      read_camt(version), FormatError,
      Catch::Matchers::MessageMatches(
          Catch::Matchers::ContainsSubstring("unsupported version")));

  const auto zero = dir / "zero.camt";
  write_raw(zero, camt_header(1, 0, 1, 1));
  CHECK_THROWS_MATCHES(
      read_camt(zero), FormatError,
      Catch::Matchers::MessageMatches(
          Catch::Matchers::ContainsSubstring("zero dimension")));

  const auto huge = dir / "huge.camt";
  write_raw(huge, camt_header(70000, 70000, 1, 1));
  CHECK_THROWS_MATCHES(
      read_camt(huge), FormatError,
      Catch::Matchers::MessageMatches(
          Catch::Matchers::ContainsSubstring("payload too large")));

  const auto short_payload = dir / "short.camt";
  std::string sp = camt_header(1, 1, 1, 2);
  put_u32(sp, 0);  // only one of two floats
  write_raw(short_payload, sp);
  CHECK_THROWS_MATCHES(
      read_camt(short_payload), FormatError,
      Catch::Matchers::MessageMatches(
          Catch::Matchers::ContainsSubstring("length mismatch")));

  const auto nan_payload = dir / "nan.camt";
  std::string np = camt_header(1, 1, 1, 1);
  put_u32(np, 0x7fc00000u);  // quiet NaN
  write_raw(nan_payload, np);
  CHECK_THROWS_MATCHES(
      read_camt(nan_payload), FormatError,
      Catch::Matchers::MessageMatches(
          Catch::Matchers::ContainsSubstring("non-finite")));

  CHECK_THROWS_AS(read_camt(dir / "does_not_exist.camt"), FormatError);
}

TEST_CASE("write_camt rejects non-finite payloads") {
  HeatmapStack stack(1, 1, 1, 2);
  stack.data()[0] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(write_camt(scratch_dir() / "inf.camt", stack), FormatError);
}

TEST_CASE("detections json round-trip") {
  DetectionsDoc doc;
  doc.classes = {"needle_driver", "grasper"};
  FrameDetections f0;
  f0.frame_id = 0;
  f0.detections.push_back(
      Detection{BoundingBox{1.5, 2.5, 10.0, 12.0}, 0, 0.875, false});
  f0.detections.push_back(
      Detection{BoundingBox{20.0, 20.0, 30.0, 31.0}, 1, 0.25, false});
  FrameDetections f1;
  f1.frame_id = 1;  // stays empty, writer omits it
  FrameDetections f2;
  f2.frame_id = 2;
  f2.detections.push_back(
      Detection{BoundingBox{5.0, 5.0, 9.0, 9.0}, 1, 0.5, true});
  doc.frames = {f0, f1, f2};

  const auto path = scratch_dir() / "dets.json";
  write_detections(path, doc);
  const DetectionsDoc loaded = read_detections(path);

  CHECK(loaded.classes == doc.classes);
  REQUIRE(loaded.frames.size() == 2);  // empty frame dropped
  CHECK(loaded.frames[0].frame_id == 0);
  CHECK(loaded.frames[1].frame_id == 2);
  REQUIRE(loaded.frames[0].detections.size() == 2);
  CHECK(loaded.frames[0].detections[0].box == f0.detections[0].box);
  CHECK(loaded.frames[0].detections[0].score == 0.875);
  CHECK_FALSE(loaded.frames[0].detections[0].from_track);
  CHECK(loaded.frames[1].detections[0].from_track);
}

TEST_CASE("write_detections validates the document") {
  const auto path = scratch_dir() / "invalid.json";
  DetectionsDoc doc;
  doc.classes = {"a"};
  doc.frames.resize(2);
  doc.frames[0].frame_id = 1;
  doc.frames[1].frame_id = 1;
  doc.frames[0].detections.push_back(
      Detection{BoundingBox{0.0, 0.0, 1.0, 1.0}, 0, 0.5, false});
  doc.frames[1].detections.push_back(
      Detection{BoundingBox{0.0, 0.0, 1.0, 1.0}, 0, 0.5, false});
  CHECK_THROWS_MATCHES(
      write_detections(path, doc), FormatError,
      Catch::Matchers::MessageMatches(
          Catch::Matchers::ContainsSubstring("strictly increasing")));

  doc.frames[1].frame_id = 2;
  doc.frames[1].detections[0].class_id = 3;
  CHECK_THROWS_MATCHES(
      write_detections(path, doc), FormatError,
      Catch::Matchers::MessageMatches(
          Catch::Matchers::ContainsSubstring("class_id out of range")));

  doc.frames[1].detections[0].class_id = 0;
  doc.frames[1].detections[0].box = BoundingBox{5.0, 0.0, 5.0, 1.0};
  CHECK_THROWS_MATCHES(
      write_detections(path, doc), FormatError,
      Catch::Matchers::MessageMatches(
          Catch::Matchers::ContainsSubstring("invalid box")));
}

TEST_CASE("read_detections rejects malformed input") {
  const auto dir = scratch_dir();

  const auto not_json = dir / "not.json";
  write_raw(not_json, "this is not json {");
  CHECK_THROWS_AS(read_detections(not_json), FormatError);

  const auto no_classes = dir / "no_classes.json";
  write_raw(no_classes, R"({"frames": []})");
  CHECK_THROWS_MATCHES(
      read_detections(no_classes), FormatError,
      Catch::Matchers::MessageMatches(
          Catch::Matchers::ContainsSubstring("classes")));

  const auto bad_order = dir / "bad_order.json";
  write_raw(bad_order, R"({
    "classes": ["a"],
    "frames": [
      {"frame_id": 2, "boxes": [
        {"class_id": 0, "score": 0.5,
         "x_min": 0, "y_min": 0, "x_max": 1, "y_max": 1}]},
      {"frame_id": 1, "boxes": [
        {"class_id": 0, "score": 0.5,
         "x_min": 0, "y_min": 0, "x_max": 1, "y_max": 1}]}
    ]})");
  CHECK_THROWS_MATCHES(
      read_detections(bad_order), FormatError,
      Catch::Matchers::MessageMatches(
          Catch::Matchers::ContainsSubstring("strictly increasing")));

  const auto missing_field = dir / "missing_field.json";
  write_raw(missing_field, R"({
    "classes": ["a"],
    "frames": [{"frame_id": 0, "boxes": [{"class_id": 0, "score": 0.5}]}]})");
  CHECK_THROWS_AS(read_detections(missing_field), FormatError);
}

TEST_CASE("real csv round-trips doubles exactly") {
  RealMatrix m = RealMatrix::zeros(3, 2);
  m.at(0, 0) = 0.1;
  m.at(0, 1) = -3.75;
  m.at(1, 0) = 1e-17;
  m.at(1, 1) = 12345.678901234567;
  m.at(2, 0) = -0.0;
  m.at(2, 1) = 2.2250738585072014e-308;  // smallest normal double

  const auto path = scratch_dir() / "real.csv";
  write_real_csv(path, m);
  const RealMatrix loaded = read_real_csv(path);
  REQUIRE(loaded.same_shape(m));
  for (std::size_t i = 0; i < m.values.size(); ++i) {
    CHECK(loaded.values[i] == m.values[i]);
  }

  // Header line is pinned to class_0..class_{K-1}.
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "class_0,class_1");
}

TEST_CASE("binary csv round-trip and validation") {
  BinaryMatrix m = BinaryMatrix::zeros(2, 3);
  m.at(0, 1) = 1;
  m.at(1, 2) = 1;
  const auto path = scratch_dir() / "labels.csv";
  write_binary_csv(path, m);
  const BinaryMatrix loaded = read_binary_csv(path);
  REQUIRE(loaded.rows == 2);
  REQUIRE(loaded.cols == 3);
  CHECK(loaded.values == m.values);

  const auto dir = scratch_dir();
  const auto bad_cell = dir / "bad_cell.csv";
  write_raw(bad_cell, "class_0\n2\n");
  CHECK_THROWS_MATCHES(read_binary_csv(bad_cell), FormatError,
                       Catch::Matchers::MessageMatches(
                           Catch::Matchers::ContainsSubstring("0 or 1")));

  const auto bad_header = dir / "bad_header.csv";
  write_raw(bad_header, "foo,bar\n0,1\n");
  CHECK_THROWS_MATCHES(read_binary_csv(bad_header), FormatError,
                       Catch::Matchers::MessageMatches(
                           Catch::Matchers::ContainsSubstring("header")));

  const auto ragged = dir / "ragged.csv";
  write_raw(ragged, "class_0,class_1\n0,1\n1\n");
  CHECK_THROWS_AS(read_real_csv(ragged), FormatError);

  const auto empty = dir / "empty.csv";
  write_raw(empty, "");
  CHECK_THROWS_AS(read_real_csv(empty), FormatError);

  const auto bad_number = dir / "bad_number.csv";
  write_raw(bad_number, "class_0\nnot_a_number\n");
  CHECK_THROWS_AS(read_real_csv(bad_number), FormatError);
}

TEST_CASE("default_class_names") {
  const auto names = default_class_names(3);
  REQUIRE(names.size() == 3);
  CHECK(names[0] == "class_0");
  CHECK(names[2] == "class_2");
}
