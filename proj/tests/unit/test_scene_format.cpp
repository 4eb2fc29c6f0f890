#include <numbers>
#include <random>
#include <string>

#include <doctest.h>

#include "streamscene/errors.hpp"
#include "streamscene/scene_format.hpp"

namespace ss = streamscene;

namespace {

ss::ParseOptions strict_opts() {
  ss::ParseOptions o;
  o.strict = true;
  return o;
}

ss::SceneDescription random_description(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> coord(-5.0, 5.0), pos(0.01, 4.0), ang(-3.1, 3.1);
  std::uniform_int_distribution<int> kind(0, 3), count(0, 8);
  static const char* labels[] = {"chair", "table", "sofa", "lamp", "Curtain"};
  ss::SceneDescription d;
  int walls = 0;
  const int n = count(rng);
  for (int i = 0; i < n; ++i) {
    const int k = kind(rng);
    if (k == 0 || walls == 0) {
      d.records.push_back(ss::WallRec{"wall_" + std::to_string(walls++), coord(rng), coord(rng),
                                      coord(rng), coord(rng), coord(rng), coord(rng), pos(rng),
                                      pos(rng)});
    } else if (k == 1) {
      d.records.push_back(ss::DoorRec{"door_" + std::to_string(i), "wall_0", coord(rng),
                                      coord(rng), coord(rng), pos(rng), pos(rng)});
    } else if (k == 2) {
      d.records.push_back(ss::WindowRec{"window_" + std::to_string(i), "wall_0", coord(rng),
                                        coord(rng), coord(rng), pos(rng), pos(rng)});
    } else {
      d.records.push_back(ss::BboxRec{"bbox_" + std::to_string(i), labels[i % 5], coord(rng),
                                      coord(rng), coord(rng), ang(rng), pos(rng), pos(rng),
                                      pos(rng)});
    }
  }
  return d;
}

}  // namespace

TEST_CASE("parse: bbox field order") {
  const auto r = ss::parse_scene_description("bbox_0=Bbox(chair,1.0,2.0,0.5,0.0,0.6,0.6,0.9)");
  CHECK(r.diagnostics.empty());
  REQUIRE(r.description.records.size() == 1);
  const auto& b = std::get<ss::BboxRec>(r.description.records[0]);
  CHECK(b == ss::BboxRec{"bbox_0", "chair", 1.0, 2.0, 0.5, 0.0, 0.6, 0.6, 0.9});
}

TEST_CASE("parse: empty and blank text") {
  CHECK(ss::parse_scene_description("").description.records.empty());
  const auto r = ss::parse_scene_description("\n  \r\n\t\n");
  CHECK(r.description.records.empty());
  CHECK(r.diagnostics.empty());
  CHECK(r.nonblank_lines == 0);
}

TEST_CASE("parse: all record kinds with whitespace and CRLF") {
  const std::string text =
      "wall_0 = Wall(0, 0, 0, 4, 0, 0, 2.5, 0.2)\r\n"
      "door_0=Door(wall_0,1,0,1,0.9,2.0)\r\n"
      "\r\n"
      "window_0=Window(wall_0,3,0,1.5,1.0,1.0)\r\n"
      "bbox_1=Bbox(Sofa,1,1,0.4,1.57,2,0.9,0.8)\r\n";
  const auto r = ss::parse_scene_description(text, strict_opts());
  CHECK(r.diagnostics.empty());
  CHECK(r.nonblank_lines == 4);
  REQUIRE(r.description.records.size() == 4);
  CHECK(std::holds_alternative<ss::WallRec>(r.description.records[0]));
  CHECK(std::get<ss::DoorRec>(r.description.records[1]).wall_id == "wall_0");
  CHECK(ss::record_id(r.description.records[2]) == "window_0");
  CHECK(r.description.bbox_count() == 1);
}

TEST_CASE("parse: lenient mode collects diagnostics and keeps good lines") {
  const std::string text =
      "bbox_0=Bbox(chair,1,2,0.5,0,0.6,0.6,0.9)\n"
      "bbox_1=Bbox(chair,1,2,0.5,0,0.6,0.6)\n"      // arity
      "bbox_2=Bbox(chair,1,x,0.5,0,0.6,0.6,0.9)\n"  // not a number
      "bbox_3=Bbox(chair,1,2,0.5,0,-1,0.6,0.9)\n"   // non-positive scale
      "bbox_0=Bbox(chair,1,2,0.5,0,0.6,0.6,0.9)\n"  // duplicate id
      "bbox_4=Thing(1)\n"                           // unknown constructor
      "garbage\n"
      "bbox_5=Bbox(table,0,0,0.4,0,1,1,0.8)\n";
  const auto r = ss::parse_scene_description(text);
  CHECK(r.description.records.size() == 2);
  REQUIRE(r.diagnostics.size() == 6);
  CHECK(r.diagnostics[0].line == 2);
  CHECK(r.diagnostics[1].line == 3);
  CHECK(r.diagnostics[1].column == 21);
  CHECK(r.diagnostics[3].message.find("duplicate") != std::string::npos);
  CHECK(r.diagnostics[5].line == 7);
}

TEST_CASE("parse: strict mode throws with position") {
  try {
    ss::parse_scene_description("bbox_0=Bbox(chair,1,2,0.5,0,0.6,0.6,0.9)\nbad line\n",
                                strict_opts());
    FAIL("expected ParseError");
  } catch (const ss::ParseError& e) {
    CHECK(e.line() == 2);
    CHECK(e.column() >= 1);
  }
  CHECK_THROWS_AS(
      ss::parse_scene_description("door_0=Door(wall_9,1,0,1,0.9,2.0)\n", strict_opts()),
      ss::ParseError);
  CHECK(ss::parse_scene_description("door_0=Door(wall_9,1,0,1,0.9,2.0)\n").diagnostics.empty());
}

TEST_CASE("serialize: empty, single record, ids verbatim") {
  CHECK(ss::serialize({}).empty());
  const std::string line = "Bbox_A7=Bbox(chair,1.000000,2.000000,0.500000,0.000000,0.600000,"
                           "0.600000,0.900000)\n";
  const auto r = ss::parse_scene_description(line);
  CHECK(ss::serialize(r.description) == line);
  CHECK(ss::record_id(r.description.records[0]) == "Bbox_A7");
}

TEST_CASE("serialize(parse(serialize(d))) == normalize(d) over fuzzed descriptions") {
  std::mt19937_64 rng(31);
  for (int k = 0; k < 1000; ++k) {
    const auto d = random_description(rng);
    const auto r = ss::parse_scene_description(ss::serialize(d));
    CHECK(r.diagnostics.empty());
    CHECK(r.description.records == ss::normalize(d).records);
    CHECK(ss::serialize(r.description) == ss::serialize(d));
  }
}

TEST_CASE("to_boxes: vocabulary filter and units") {
  const ss::CategoryVocabulary chairs({"chair"});
  auto r = ss::parse_scene_description("bbox_0=Bbox(CHAIR,1,2,0.5,0.3,0.6,0.5,0.9)\n"
                                       "bbox_1=Bbox(tub,0,0,0.3,0,1.5,0.7,0.6)\n");
  const auto conv = ss::to_boxes(r.description, chairs);
  REQUIRE(conv.boxes.size() == 1);
  CHECK(conv.dropped == 1);
  CHECK(conv.boxes[0].label == "chair");
  CHECK(conv.boxes[0].yaw == doctest::Approx(0.3));

  auto cm = ss::parse_scene_description("bbox_0=Bbox(chair,100,0,45,90,60,50,90)\n",
                                        ss::ParseOptions{ss::UnitConfig::centimeters_degrees(), false});
  CHECK(cm.description.units == ss::UnitConfig::centimeters_degrees());
  const auto b = ss::to_boxes(cm.description, chairs).boxes.at(0);
  CHECK(b.dims.x() == doctest::Approx(0.60));
  CHECK(b.center.x() == doctest::Approx(1.0));
  CHECK(b.yaw == doctest::Approx(std::numbers::pi / 2));
}

TEST_CASE("boxes_to_description round trip") {
  std::vector<ss::OrientedBox3> boxes{
      ss::OrientedBox3("chair", ss::Vec3(1, 2, 0.45), ss::Vec3(0.6, 0.5, 0.9), 0.25),
      ss::OrientedBox3("table", ss::Vec3(-1, 0.5, 0.4), ss::Vec3(1.2, 0.8, 0.8), -1.0)};
  const auto d = ss::boxes_to_description(boxes);
  CHECK(ss::record_id(d.records[1]) == "bbox_1");
  const auto back = ss::to_boxes(d, ss::CategoryVocabulary::standard()).boxes;
  REQUIRE(back.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back[i].label == boxes[i].label);
    CHECK((back[i].center - boxes[i].center).norm() < 1e-12);
    CHECK((back[i].dims - boxes[i].dims).norm() < 1e-12);
    CHECK(back[i].yaw == doctest::Approx(boxes[i].yaw));
  }
}
