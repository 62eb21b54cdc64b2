// Copyright (c) 2026 The goa Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "goa/params.hpp"
#include "goa/pool_library.hpp"
#include "goa/records.hpp"
#include "test_util.hpp"

namespace {

using namespace goa;
namespace fs = std::filesystem;

fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("goa_records_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

TEST(GraphRecord, EmptyGraphRoundTrips) {
  const GroupGraph g;
  const auto line = records::encode_graph(g);
  EXPECT_EQ(line, R"({"v":"v1","type":"graph","selected":[],"edges":[]})");
  EXPECT_EQ(records::decode_graph(line), g);
}

TEST(GraphRecord, RepeatedSelectionsRoundTrip) {
  const GroupGraph g{{3, 1, 1}, {{0, 1}, {0, 2}}};
  const auto line = records::encode_graph(g);
  EXPECT_NE(line.find(R"("edges":["0->1","0->2"])"), std::string::npos);
  EXPECT_EQ(records::decode_graph(line), g);
}

TEST(GraphRecord, BackwardEdgeIsRejectedWithPosition) {
  const std::string line = R"({"v":"v1","type":"graph","selected":[0,1,2],"edges":["2->1"]})";
  try {
    records::decode_graph(line, 7);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 7u);
    EXPECT_EQ(e.column(), line.find("\"2->1\""));
    EXPECT_NE(std::string(e.what()).find("i < t"), std::string::npos);
  }
}

TEST(GraphRecord, MalformedInputsAreParseErrors) {
  EXPECT_THROW(records::decode_graph("{not json"), ParseError);
  EXPECT_THROW(records::decode_graph(R"({"type":"graph","selected":[],"edges":[]})"), ParseError);
  EXPECT_THROW(records::decode_graph(R"({"v":"v1","type":"group","selected":[],"edges":[]})"),
               ParseError);
  EXPECT_THROW(records::decode_graph(R"({"v":"v1","type":"graph","selected":[0,1],"edges":["0-1"]})"),
               ParseError);
  EXPECT_THROW(records::decode_graph(R"({"v":"v1","type":"graph","selected":[0],"edges":["0->1"]})"),
               ParseError);
  EXPECT_THROW(
      records::decode_graph(R"({"v":"v1","type":"graph","selected":[0,1],"edges":["0->1","0->1"]})"),
      ParseError);
  EXPECT_THROW(records::decode_graph(R"({"v":"v1","type":"graph","selected":[-1],"edges":[]})"),
               ParseError);
}

TEST(GraphRecord, RandomGraphsRoundTrip) {
  CounterRng rng(3);
  for (int it = 0; it < 200; ++it) {
    GroupGraph g;
    const std::size_t n = rng.uniform_index(7);
    for (std::size_t t = 0; t < n; ++t) g.selected.push_back(rng.uniform_index(20));
    for (std::size_t t = 1; t < n; ++t)
      for (std::size_t i = 0; i < t; ++i)
        if (rng.uniform() < 0.4) g.edges.insert({i, t});
    EXPECT_EQ(records::decode_graph(records::encode_graph(g)), g);
  }
}

TEST(GroupRecord, BundledPoolRoundTripsThroughFile) {
  const auto dir = temp_dir("pool");
  const auto pool = pools::math_pool();
  records::write_pool(dir / "pool.jsonl", pool);
  EXPECT_FALSE(fs::exists(dir / "pool.jsonl.tmp"));
  const auto back = records::read_pool(dir / "pool.jsonl");
  ASSERT_EQ(back.size(), pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) EXPECT_EQ(back.groups[i], pool.groups[i]);
}

TEST(GroupRecord, UnknownTopologyIsRejected) {
  const std::string line =
      R"({"v":"v1","type":"group","id":0,"name":"n","expertise":"e","roles":["a"],"intra_topology":"Ring","role_prompt":"p"})";
  EXPECT_THROW(records::decode_group(line), ParseError);
}

TEST(TrajectoryRecord, RoundTripsWithNestedGraph) {
  const Trajectory t{"what is 2+2?", "4", {{1, 0}, {{0, 1}}}, true, 321};
  const auto line = records::encode_trajectory(t);
  EXPECT_NE(line.find(R"("graph":{"selected":[1,0],"edges":["0->1"]})"), std::string::npos);
  EXPECT_EQ(records::decode_trajectory(line), t);
}

TEST(QueryRecord, RoundTripsAllFields) {
  const QueryItem q{"q", "12.5", AnswerMatch::Numeric, 0.01, {"Inspector"}};
  EXPECT_EQ(records::decode_query(records::encode_query(q)), q);
  EXPECT_THROW(records::decode_query(R"({"v":"v1","type":"query","query":"q","gold":"1","match":"fuzzy"})"),
               ParseError);
}

TEST(Files, DatasetRoundTripAndLineNumbersInErrors) {
  const auto dir = temp_dir("dataset");
  const std::vector<Trajectory> d{{"a", "1", {{0}, {}}, true, 5}, {"b", "2", {{1, 2}, {{0, 1}}}, true, 9}};
  records::write_dataset(dir / "d.jsonl", d);
  EXPECT_EQ(records::read_dataset(dir / "d.jsonl"), d);

  std::ofstream(dir / "bad.jsonl") << records::encode_trajectory(d[0]) << "\n\n{oops\n";
  try {
    records::read_dataset(dir / "bad.jsonl");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  EXPECT_THROW(records::read_dataset(dir / "missing.jsonl"), ConfigError);
}

TEST(Checkpoint, BinaryRoundTripIsExact) {
  ModelConfig c = goa::testing::small_config();
  Checkpoint ck{c, "hash", 12, ModelParams::random(c, 9), std::nullopt};
  auto opt = make_optimizer_state<Real>(ck.params, AdamwHyper{});
  opt.step = 3;
  opt.first_moment[0][0] = 0.25;
  ck.optimizer = opt;
  const auto back = deserialize_checkpoint(serialize_checkpoint(ck));
  EXPECT_EQ(back.config, c);
  EXPECT_EQ(back.embedding_kind, "hash");
  EXPECT_EQ(back.epochs_completed, 12u);
  EXPECT_TRUE(back.params == ck.params);
  ASSERT_TRUE(back.optimizer.has_value());
  EXPECT_EQ(back.optimizer->step, 3u);
  EXPECT_EQ(back.optimizer->first_moment, opt.first_moment);
  EXPECT_EQ(back.optimizer->names, opt.names);
}

TEST(Checkpoint, CorruptBytesAreParseErrors) {
  ModelConfig c = goa::testing::small_config();
  const auto bytes = serialize_checkpoint({c, "hash", 0, ModelParams::random(c, 1), std::nullopt});
  EXPECT_THROW(deserialize_checkpoint("NOTACKPT"), ParseError);
  EXPECT_THROW(deserialize_checkpoint(bytes.substr(0, bytes.size() / 2)), ParseError);
}

TEST(Checkpoint, FileRoundTrip) {
  const auto dir = temp_dir("ckpt");
  ModelConfig c = goa::testing::small_config();
  const Checkpoint ck{c, "hash", 0, ModelParams::random(c, 2), std::nullopt};
  save_checkpoint(dir / "m.ckpt", ck);
  EXPECT_TRUE(load_checkpoint(dir / "m.ckpt").params == ck.params);
}

}  // namespace
