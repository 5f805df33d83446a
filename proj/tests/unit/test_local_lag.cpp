#include <doctest.h>

#include <algorithm>
#include <random>

#include "medium/local_lag.hpp"
#include "medium/rollback.hpp"
#include "support.hpp"

using namespace medium;
using testing::error_of;

namespace {

pdu::Message state(std::uint64_t ts, std::uint32_t seq = 0, std::uint32_t sender = 1) {
  return pdu::StateUpdate{sender, 1, seq, ts, {}, {}, false};
}

}  // namespace

TEST_CASE("set_local_lag_value") {
  LagPolicy policy;
  policy.set_local_lag_value("car", 500);
  PlayoutBuffer buf;
  CHECK(buf.enqueue(state(100), "car", ConsistencyMode::Normal, policy, 100).entry.due == 600);

  policy.set_local_lag_value("car", 0);
  CHECK(buf.enqueue(state(700), "car", ConsistencyMode::Normal, policy, 700).entry.due == 700);

  policy.set_local_lag_value("tank", 1000);
  CHECK(buf.enqueue(state(2000), "tank", ConsistencyMode::Normal, policy, 2000).entry.due == 3000);

  CHECK(error_of([&] { policy.set_local_lag_value("car", -1); }) == Errc::NegativeLag);
  CHECK(policy.base_lag("unknown") == policy.default_lag_ms);
}

TEST_CASE("changing the lag keeps due times of buffered entries") {
  LagPolicy policy;
  policy.set_local_lag_value("car", 500);
  PlayoutBuffer buf;
  buf.enqueue(state(100, 0), "car", ConsistencyMode::Normal, policy, 150);
  policy.set_local_lag_value("car", 100);
  buf.enqueue(state(120, 1), "car", ConsistencyMode::Normal, policy, 160);
  const auto out = buf.release_due(600);
  REQUIRE(out.size() == 2);
  CHECK(out[0].due == 220);
  CHECK(out[1].due == 600);
}

TEST_CASE("enqueue timeliness") {
  LagPolicy policy;
  policy.set_local_lag_value("car", 500);
  PlayoutBuffer buf;
  auto r = buf.enqueue(state(100), "car", ConsistencyMode::Normal, policy, 350);
  CHECK(r.entry.due == 600);
  CHECK(r.timeliness == Timeliness::OnTime);

  r = buf.enqueue(state(100, 1), "car", ConsistencyMode::Normal, policy, 700);
  CHECK(r.entry.due == 600);
  CHECK(r.timeliness == Timeliness::Late);
  CHECK(buf.size() == 1);  // late entries are not stored

  policy.critical_scale = 0.5;
  r = buf.enqueue(state(100, 2), "car", ConsistencyMode::Strong, policy, 300);
  CHECK(r.entry.due == 350);
  CHECK(r.timeliness == Timeliness::OnTime);

  // boundary: now == due is still on time
  CHECK(buf.enqueue(state(100, 3), "car", ConsistencyMode::Normal, policy, 600).timeliness == Timeliness::OnTime);
}

TEST_CASE("strong mode never lengthens the lag") {
  LagPolicy policy;
  for (double scale : {0.1, 0.5, 1.0}) {
    policy.critical_scale = scale;
    for (std::int64_t l : {0, 1, 250, 500, 1000}) {
      policy.set_local_lag_value("x", l);
      CHECK(policy.effective_lag("x", ConsistencyMode::Strong) <= policy.effective_lag("x", ConsistencyMode::Normal));
    }
  }
}

TEST_CASE("release_due ordering") {
  PlayoutBuffer buf;
  CHECK(buf.release_due(1000).empty());
  buf.push({state(0, 1), 600, 0});
  buf.push({state(0, 0), 550, 0});
  const auto out = buf.release_due(600);
  REQUIRE(out.size() == 2);
  CHECK(out[0].due == 550);
  CHECK(out[1].due == 600);
  CHECK(buf.release_due(600).empty());
}

TEST_CASE("stepped releases equal the fully sorted list") {
  std::mt19937_64 rng(99);
  PlayoutBuffer buf;
  std::vector<PlayoutEntry> all;
  for (std::uint32_t i = 0; i < 100; ++i) {
    const std::uint64_t ts = rng() % 400;
    PlayoutEntry e{state(ts, i, 1 + static_cast<std::uint32_t>(rng() % 3)), ts + rng() % 200, 0};
    all.push_back(e);
    buf.push(e);
  }
  std::vector<PlayoutEntry> released;
  for (std::uint64_t now = 0; now <= 700; ++now) {
    for (auto& e : buf.release_due(now)) {
      CHECK(e.due <= now);
      released.push_back(e);
    }
  }
  std::sort(all.begin(), all.end(), [](const PlayoutEntry& a, const PlayoutEntry& b) {
    return std::make_tuple(a.due, key_of(a.msg)) < std::make_tuple(b.due, key_of(b.msg));
  });
  REQUIRE(released.size() == all.size());
  for (std::size_t i = 0; i < all.size(); ++i) CHECK(key_of(released[i].msg) == key_of(all[i].msg));
  CHECK(buf.empty());
}

TEST_CASE("no message is late when the lag covers the maximum delay") {
  std::mt19937_64 rng(5);
  LagPolicy policy;
  policy.set_local_lag_value("car", 300);
  PlayoutBuffer buf;
  for (std::uint32_t i = 0; i < 1000; ++i) {
    const std::uint64_t ts = i * 10;
    const std::uint64_t arrival = ts + 200 + rng() % 101;  // d in [200, 300]
    CHECK(buf.enqueue(state(ts, i), "car", ConsistencyMode::Normal, policy, arrival).timeliness == Timeliness::OnTime);
  }
}
