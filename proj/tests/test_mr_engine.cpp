#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <cstdlib>

#include "rsvd/matrix_io.hpp"
#include "rsvd/mr_engine.hpp"

using namespace rsvd;
using mr::JobSpec;
using mr::Record;

namespace {

std::vector<Record> make_input(std::initializer_list<Record> records) { return records; }

}  // namespace

TEST_CASE("a job with no reducer passes mapper output through") {
  JobSpec spec;
  spec.name = "identity";
  spec.mapper = [](std::uint64_t key, const std::string& payload) {
    return std::vector<Record>{{key, payload}};
  };
  const auto input = make_input({{0, "a"}, {1, "b"}});
  const mr::JobResult res = mr::run_job(spec, input);
  CHECK(res.output == input);
  CHECK(res.stats.input_records == 2);
  CHECK(res.stats.map_emits == 2);
  CHECK(res.stats.shuffle_bytes == 0);
}

TEST_CASE("counting job groups by key and sums") {
  JobSpec spec;
  spec.name = "mod2-count";
  spec.mapper = [](std::uint64_t key, const std::string&) {
    return std::vector<Record>{{key % 2, "1"}};
  };
  spec.reducer = [](std::uint64_t key, const std::vector<std::string>& payloads) {
    long sum = 0;
    for (const std::string& p : payloads) sum += std::strtol(p.c_str(), nullptr, 10);
    return std::vector<Record>{{key, std::to_string(sum)}};
  };

  std::vector<Record> input;
  for (std::uint64_t i = 0; i < 10; ++i) input.push_back({i, "x"});

  for (std::size_t partitions : {1, 3, 8}) {
    spec.partitions = partitions;
    const mr::JobResult res = mr::run_job(spec, input);
    REQUIRE(res.output.size() == 2);
    CHECK(res.output[0] == Record{0, "5"});
    CHECK(res.output[1] == Record{1, "5"});
    CHECK(res.stats.map_emits == 10);
    CHECK(res.stats.shuffle_bytes == 10);
  }
}

TEST_CASE("floating point reduction is identical at any partition count") {
  // Mixed magnitudes make the summation order observable.
  std::vector<Record> input;
  for (std::uint64_t i = 0; i < 64; ++i) {
    const double v = (i % 2 ? 1.0 : -1.0) * std::pow(10.0, static_cast<double>(i % 21) - 10);
    input.push_back({i, format_double(v)});
  }

  JobSpec spec;
  spec.name = "float-sum";
  spec.mapper = [](std::uint64_t key, const std::string& payload) {
    return std::vector<Record>{{key % 3, payload}};
  };
  spec.reducer = [](std::uint64_t key, const std::vector<std::string>& payloads) {
    double sum = 0.0;
    for (const std::string& p : payloads) sum += parse_double(p);
    return std::vector<Record>{{key, format_double(sum)}};
  };

  spec.partitions = 1;
  const mr::JobResult base = mr::run_job(spec, input);
  for (std::size_t partitions : {2, 4, 8}) {
    spec.partitions = partitions;
    CHECK(mr::run_job(spec, input).output == base.output);
  }
}

TEST_CASE("every map emit reaches exactly one reducer invocation") {
  JobSpec spec;
  spec.name = "fanout";
  spec.partitions = 4;
  spec.mapper = [](std::uint64_t key, const std::string&) {
    std::vector<Record> out;
    for (std::uint64_t j = 0; j <= key % 4; ++j) out.push_back({j, "p"});
    return out;
  };
  std::atomic<std::uint64_t> received{0};
  spec.reducer = [&received](std::uint64_t key, const std::vector<std::string>& payloads) {
    received += payloads.size();
    return std::vector<Record>{{key, std::to_string(payloads.size())}};
  };

  std::vector<Record> input;
  for (std::uint64_t i = 0; i < 37; ++i) input.push_back({i, ""});
  const mr::JobResult res = mr::run_job(spec, input);
  CHECK(received.load() == res.stats.map_emits);
}

TEST_CASE("reducer payloads arrive sorted by origin key") {
  JobSpec spec;
  spec.name = "origin-order";
  spec.partitions = 8;
  spec.mapper = [](std::uint64_t key, const std::string&) {
    return std::vector<Record>{{0, std::to_string(key) + ".a"},
                               {0, std::to_string(key) + ".b"}};
  };
  std::vector<std::string> seen;
  spec.reducer = [&seen](std::uint64_t key, const std::vector<std::string>& payloads) {
    seen = payloads;
    return std::vector<Record>{{key, ""}};
  };

  // Input arrives with shuffled keys; delivery order must not care.
  std::vector<Record> input{{4, ""}, {1, ""}, {3, ""}, {0, ""}, {2, ""}};
  mr::run_job(spec, input);
  const std::vector<std::string> expected{"0.a", "0.b", "1.a", "1.b", "2.a",
                                          "2.b", "3.a", "3.b", "4.a", "4.b"};
  CHECK(seen == expected);
}

TEST_CASE("final_local_reduce sees all reducer output sorted by key") {
  JobSpec spec;
  spec.name = "final";
  spec.partitions = 4;
  spec.mapper = [](std::uint64_t key, const std::string& payload) {
    return std::vector<Record>{{key % 5, payload}};
  };
  spec.reducer = [](std::uint64_t key, const std::vector<std::string>& payloads) {
    return std::vector<Record>{{key, std::to_string(payloads.size())}};
  };
  int calls = 0;
  spec.final_local_reduce = [&calls](const std::vector<Record>& rows) {
    ++calls;
    std::string all;
    for (const Record& r : rows) {
      all += std::to_string(r.key) + ":" + r.payload + " ";
    }
    return std::vector<Record>{{0, all}};
  };

  std::vector<Record> input;
  for (std::uint64_t i = 0; i < 20; ++i) input.push_back({i, "z"});
  const mr::JobResult res = mr::run_job(spec, input);
  CHECK(calls == 1);
  REQUIRE(res.output.size() == 1);
  CHECK(res.output[0].payload == "0:4 1:4 2:4 3:4 4:4 ");
}

TEST_CASE("mapper errors surface as JobError naming the first bad record") {
  JobSpec spec;
  spec.name = "boom";
  spec.partitions = 4;
  spec.mapper = [](std::uint64_t key, const std::string& payload) {
    if (payload == "bad") throw MalformedRecord("unparsable payload");
    return std::vector<Record>{{key, payload}};
  };

  std::vector<Record> input;
  for (std::uint64_t i = 0; i < 16; ++i) input.push_back({i, "ok"});
  input[13].payload = "bad";
  input[3].payload = "bad";

  try {
    mr::run_job(spec, input);
    FAIL("expected JobError");
  } catch (const JobError& e) {
    CHECK(std::string(e.what()).find("key 3") != std::string::npos);
    REQUIRE(e.cause());
    CHECK_THROWS_AS(std::rethrow_exception(e.cause()), MalformedRecord);
  }
}

TEST_CASE("join_rows is an inner join with drop counting") {
  const auto one = mr::join_rows({{0, "x"}}, {{0, "y"}});
  REQUIRE(one.rows.size() == 1);
  CHECK(one.rows[0].key == 0);
  CHECK(one.rows[0].left == "x");
  CHECK(one.rows[0].right == "y");
  CHECK(one.dropped_keys == 0);

  const auto dropped = mr::join_rows({{0, "x"}, {1, "z"}}, {{0, "y"}});
  REQUIRE(dropped.rows.size() == 1);
  CHECK(dropped.dropped_keys == 1);

  CHECK_THROWS_AS(mr::join_rows({{0, "x"}, {0, "x2"}}, {{0, "y"}}), DuplicateJoinKey);
  CHECK_THROWS_AS(mr::join_rows({{0, "x"}}, {{1, "y"}, {1, "y2"}}), DuplicateJoinKey);
}

TEST_CASE("join jobs co-group pairs for the mapper") {
  mr::JoinJobSpec spec;
  spec.name = "join";
  spec.partitions = 2;
  spec.mapper = [](std::uint64_t key, const std::string& left, const std::string& right) {
    return std::vector<Record>{{key, left + "+" + right}};
  };
  const mr::JobResult res =
      mr::run_join_job(spec, {{2, "l2"}, {0, "l0"}, {5, "l5"}}, {{0, "r0"}, {2, "r2"}});
  REQUIRE(res.output.size() == 2);
  CHECK(res.output[0] == Record{0, "l0+r0"});
  CHECK(res.output[1] == Record{2, "l2+r2"});
  CHECK(res.stats.input_records == 2);
  CHECK(res.stats.dropped_join_keys == 1);
}

TEST_CASE("default_partitions honors RSVD_WORKERS") {
  ::setenv("RSVD_WORKERS", "3", 1);
  CHECK(mr::default_partitions() == 3);
  ::setenv("RSVD_WORKERS", "junk", 1);
  CHECK(mr::default_partitions() >= 1);
  ::unsetenv("RSVD_WORKERS");
  CHECK(mr::default_partitions() >= 1);
}

TEST_CASE("partitions below one are rejected") {
  JobSpec spec;
  spec.name = "bad";
  spec.partitions = 0;
  spec.mapper = [](std::uint64_t key, const std::string& payload) {
    return std::vector<Record>{{key, payload}};
  };
  CHECK_THROWS_AS(mr::run_job(spec, {{0, "a"}}), InvalidParams);
}
