#include <random>
#include <set>

#include "dingdate/error.hpp"
#include "dingdate/graph.hpp"
#include "dingdate/random_graph.hpp"
#include "doctest.h"

using namespace dingdate;

namespace {

Errc error_code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return Errc::Io;
}

GraphSpec two_dynasty_spec() {
  // A: p1, p2; B: p3
  GraphSpec s;
  s.nodes = {{"A", NodeKind::Dynasty}, {"B", NodeKind::Dynasty}, {"p1", NodeKind::Period},
             {"p2", NodeKind::Period}, {"p3", NodeKind::Period}};
  s.subsumption = {{"A", "p1"}, {"A", "p2"}, {"B", "p3"}};
  return s;
}

Assignment bits(std::string_view s) {
  Assignment a;
  for (char c : s) a.bits.push_back(c == '1');
  return a;
}

// Every bit-vector of the view, filtered by is_legal.
std::vector<Assignment> brute_force_legal(const GraphView& view) {
  std::vector<Assignment> out;
  const std::size_t n = view.size();
  for (std::uint64_t mask = 0; mask < (1ull << n); ++mask) {
    Assignment a;
    a.bits.resize(n);
    // bit 0 of the assignment is the most significant bit of the counter, so
    // counting up walks lexicographic order.
    for (std::size_t i = 0; i < n; ++i) a.bits[i] = (mask >> (n - 1 - i)) & 1u;
    if (is_legal(view, a)) out.push_back(a);
  }
  return out;
}

}  // namespace

TEST_CASE("ding era hierarchy has 4 dynasties, 11 periods, n = 15") {
  const RelationGraph g = build_graph(ding_era_spec());
  CHECK(g.count(NodeKind::Dynasty) == 4);
  CHECK(g.count(NodeKind::Period) == 11);
  CHECK(g.era_count() == 15);
  // dynasty pairs + period pairs
  CHECK(g.exclusion_edges().size() == 6 + 55);
  CHECK(g.node(g.dynasty_of(g.index_of("Mid Western Zhou"))).name == "Western Zhou");
}

TEST_CASE("minimal hierarchy") {
  GraphSpec s;
  s.nodes = {{"D", NodeKind::Dynasty}, {"P", NodeKind::Period}};
  s.subsumption = {{"D", "P"}};
  const RelationGraph g = build_graph(s);
  CHECK(g.size() == 2);
  CHECK(g.exclusion_edges().empty());
}

TEST_CASE("build_graph errors") {
  SUBCASE("two dynasty parents") {
    GraphSpec s = two_dynasty_spec();
    s.subsumption.emplace_back("B", "p1");
    CHECK(error_code_of([&] { build_graph(s); }) == Errc::MultipleDynastyParents);
  }
  SUBCASE("period without dynasty") {
    GraphSpec s = two_dynasty_spec();
    s.nodes.push_back({"p4", NodeKind::Period});
    CHECK(error_code_of([&] { build_graph(s); }) == Errc::Orphan);
  }
  SUBCASE("shape without period") {
    GraphSpec s = two_dynasty_spec();
    s.nodes.push_back({"s", NodeKind::Shape});
    CHECK(error_code_of([&] { build_graph(s); }) == Errc::Orphan);
  }
  SUBCASE("characteristic without period") {
    GraphSpec s = two_dynasty_spec();
    s.nodes.push_back({"c", NodeKind::Characteristic});
    CHECK(error_code_of([&] { build_graph(s); }) == Errc::Orphan);
  }
  SUBCASE("duplicate") {
    GraphSpec s = two_dynasty_spec();
    s.nodes.push_back({"p1", NodeKind::Shape});
    CHECK(error_code_of([&] { build_graph(s); }) == Errc::DuplicateNode);
  }
  SUBCASE("cycle") {
    GraphSpec s = two_dynasty_spec();
    s.subsumption.emplace_back("p1", "A");
    CHECK(error_code_of([&] { build_graph(s); }) == Errc::Cycle);
  }
  SUBCASE("unknown endpoint") {
    GraphSpec s = two_dynasty_spec();
    s.subsumption.emplace_back("A", "nowhere");
    CHECK(error_code_of([&] { build_graph(s); }) == Errc::UnknownNode);
  }
  SUBCASE("edge between wrong kinds") {
    GraphSpec s = two_dynasty_spec();
    s.nodes.push_back({"s", NodeKind::Shape});
    s.subsumption.emplace_back("A", "s");
    CHECK(error_code_of([&] { build_graph(s); }) == Errc::InvalidEdge);
  }
  SUBCASE("characteristics may not exclude each other") {
    GraphSpec s = two_dynasty_spec();
    s.nodes.push_back({"c1", NodeKind::Characteristic});
    s.nodes.push_back({"c2", NodeKind::Characteristic});
    s.subsumption.emplace_back("p1", "c1");
    s.subsumption.emplace_back("p1", "c2");
    s.exclusion.emplace_back("c1", "c2");
    CHECK(error_code_of([&] { build_graph(s); }) == Errc::InvalidEdge);
  }
}

TEST_CASE("mandated exclusions are inserted among shapes but not characteristics") {
  GraphSpec s = two_dynasty_spec();
  s.nodes.push_back({"s1", NodeKind::Shape});
  s.nodes.push_back({"s2", NodeKind::Shape});
  s.nodes.push_back({"c1", NodeKind::Characteristic});
  s.nodes.push_back({"c2", NodeKind::Characteristic});
  for (auto a : {"s1", "s2", "c1", "c2"}) s.subsumption.emplace_back("p1", a);
  const RelationGraph g = build_graph(s);
  CHECK(g.excludes(g.index_of("s1"), g.index_of("s2")));
  CHECK(g.excludes(g.index_of("A"), g.index_of("B")));
  CHECK(g.excludes(g.index_of("p1"), g.index_of("p3")));
  CHECK_FALSE(g.excludes(g.index_of("c1"), g.index_of("c2")));
  CHECK_FALSE(g.excludes(g.index_of("A"), g.index_of("p1")));
}

TEST_CASE("is_legal") {
  const RelationGraph g = build_graph(two_dynasty_spec());
  const GraphView era(g, Scope::Era);
  CHECK(is_legal(era, bits("00000")));
  CHECK_FALSE(is_legal(era, bits("10110")));  // two periods
  CHECK_FALSE(is_legal(era, bits("00100")));  // period without its dynasty
  CHECK_FALSE(is_legal(era, bits("01100")));  // period under the wrong dynasty
  CHECK(is_legal(era, bits("10100")));
  CHECK(error_code_of([&] { is_legal(era, bits("000")); }) == Errc::LengthMismatch);
}

TEST_CASE("enumerate_legal: two dynasties, three periods") {
  const RelationGraph g = build_graph(two_dynasty_spec());
  const GraphView era(g, Scope::Era);
  const auto legal = enumerate_legal(era);
  std::vector<std::string> got;
  for (const auto& a : legal) got.push_back(a.str());
  // lexicographic order over (A B p1 p2 p3)
  CHECK(got == std::vector<std::string>{"00000", "01000", "01001", "10000", "10010", "10100"});
  CHECK(legal.size() == 6);
  CHECK(legal == brute_force_legal(era));
}

TEST_CASE("enumerate_legal: small cases") {
  GraphSpec s;
  s.nodes = {{"D", NodeKind::Dynasty}, {"P", NodeKind::Period}, {"S", NodeKind::Shape}};
  s.subsumption = {{"D", "P"}, {"P", "S"}};
  const RelationGraph g = build_graph(s);

  std::vector<std::string> era;
  for (const auto& a : enumerate_legal(GraphView(g, Scope::Era))) era.push_back(a.str());
  CHECK(era == std::vector<std::string>{"00", "10", "11"});

  std::vector<std::string> es;
  for (const auto& a : enumerate_legal(GraphView(g, Scope::EraShape))) es.push_back(a.str());
  CHECK(es == std::vector<std::string>{"000", "100", "110", "111"});
}

TEST_CASE("enumerate_legal respects the cap") {
  std::mt19937_64 rng(1);
  const RelationGraph g = build_graph(random_era_spec(rng, 5, 17));
  CHECK(error_code_of([&] { enumerate_legal(GraphView(g, Scope::Era)); }) == Errc::TooLarge);
  CHECK(enumerate_legal(GraphView(g, Scope::Era), 22).size() == 1 + 5 + 17);
}

TEST_CASE("enumeration equals the exhaustive is_legal filter on random graphs") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 60; ++trial) {
    const RelationGraph g = build_graph(random_graph_spec(rng));
    for (Scope scope : {Scope::Era, Scope::EraShape, Scope::EraCharacteristic}) {
      const GraphView view(g, scope);
      REQUIRE(view.size() <= 16);
      CHECK(enumerate_legal(view) == brute_force_legal(view));
    }
  }
}

TEST_CASE("era views have 1 + n_d + n_p legal assignments") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t nd = std::uniform_int_distribution<std::size_t>(1, 4)(rng);
    const std::size_t np = std::uniform_int_distribution<std::size_t>(1, 10)(rng);
    const RelationGraph g = build_graph(random_era_spec(rng, nd, np));
    CHECK(enumerate_legal(GraphView(g, Scope::Era)).size() == 1 + nd + np);
  }
}

TEST_CASE("adding an exclusion edge never enlarges the legal set") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    GraphSpec spec = random_graph_spec(rng);
    const RelationGraph before = build_graph(spec);
    // Pick any non-characteristic pair not already excluded.
    std::vector<std::pair<NodeIndex, NodeIndex>> candidates;
    for (NodeIndex a = 0; a < before.size(); ++a)
      for (NodeIndex b = a + 1; b < before.size(); ++b) {
        const bool both_chars = before.node(a).kind == NodeKind::Characteristic &&
                                before.node(b).kind == NodeKind::Characteristic;
        if (!both_chars && !before.excludes(a, b)) candidates.emplace_back(a, b);
      }
    if (candidates.empty()) continue;
    const auto [a, b] = candidates[std::uniform_int_distribution<std::size_t>(0, candidates.size() - 1)(rng)];
    spec.exclusion.emplace_back(before.node(a).name, before.node(b).name);
    const RelationGraph after = build_graph(spec);
    for (Scope scope : {Scope::Era, Scope::EraShape, Scope::EraCharacteristic}) {
      const auto small = enumerate_legal(GraphView(after, scope));
      const auto large = enumerate_legal(GraphView(before, scope));
      CHECK(small.size() <= large.size());
      std::set<std::string> big;
      for (const auto& x : large) big.insert(x.str());
      for (const auto& x : small) CHECK(big.count(x.str()) == 1);
    }
  }
}

TEST_CASE("schema JSON round trip") {
  const char* text = R"({
    "dynasties": ["A", "B"],
    "periods": [{"name": "p1", "parent": "A"}, {"name": "p2", "parent": "B"}],
    "shapes": [{"name": "s1", "parent_periods": ["p1", "p2"]}],
    "characteristics": [{"name": "c1", "parent_periods": ["p2"]}]
  })";
  const RelationGraph g = build_graph(GraphSpec::from_json(nlohmann::json::parse(text)));
  CHECK(g.size() == 6);
  CHECK(g.parents(g.index_of("s1")).size() == 2);
  const RelationGraph again = build_graph(GraphSpec::from_json(g.to_json()));
  CHECK(again.to_json() == g.to_json());
}
