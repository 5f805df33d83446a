#include <doctest.h>

#include <algorithm>
#include <random>
#include <stdexcept>

#include "medium/rollback.hpp"
#include "support.hpp"

using namespace medium;
using testing::error_of;

namespace {

pdu::Message ev(std::uint64_t ts, std::uint32_t seq, std::uint32_t sender = 1) {
  return pdu::EventMessage{sender, 1, seq, ts, pdu::EventKind::Fire, {}};
}

std::vector<std::uint64_t> stamps(const std::vector<pdu::Message>& msgs) {
  std::vector<std::uint64_t> out;
  for (const auto& m : msgs) out.push_back(pdu::timestamp_of(m));
  return out;
}

/// Game double that mirrors the callbacks into a visible sequence.
struct Trace {
  std::vector<std::string> calls;
  std::vector<std::uint64_t> visible;
  RollbackCallbacks callbacks() {
    return {[this](const pdu::Message& m) {
              calls.push_back("undo(" + std::to_string(pdu::timestamp_of(m)) + ")");
              REQUIRE(!visible.empty());
              CHECK(visible.back() == pdu::timestamp_of(m));
              visible.pop_back();
            },
            [this](const pdu::Message& m) {
              calls.push_back("apply(" + std::to_string(pdu::timestamp_of(m)) + ")");
              visible.push_back(pdu::timestamp_of(m));
            }};
  }
};

}  // namespace

TEST_CASE("first message applies") {
  DeliveryLog log;
  CHECK(std::holds_alternative<Apply>(log.on_deliver(ev(100, 0), 100)));
}

TEST_CASE("late message yields undo newest-first and sorted replay") {
  DeliveryLog log;
  Trace game;
  for (auto [ts, seq] : {std::pair{100, 0}, {130, 2}, {140, 3}}) log.deliver(game.callbacks(), ev(ts, seq), 150);
  const auto outcome = log.on_deliver(ev(120, 1), 150);
  REQUIRE(std::holds_alternative<RollbackDirective>(outcome));
  const auto& d = std::get<RollbackDirective>(outcome);
  CHECK(stamps(d.undo) == std::vector<std::uint64_t>{140, 130});
  CHECK(stamps(d.replay) == std::vector<std::uint64_t>{120, 130, 140});

  game.calls.clear();
  log.apply_directive(game.callbacks(), d);
  CHECK(game.calls == std::vector<std::string>{"undo(140)", "undo(130)", "apply(120)", "apply(130)", "apply(140)"});
  CHECK(game.visible == std::vector<std::uint64_t>{100, 120, 130, 140});
  CHECK(stamps(log.applied()) == game.visible);
}

TEST_CASE("two successive late messages") {
  DeliveryLog log;
  Trace game;
  for (auto [ts, seq] : {std::pair{100, 0}, {130, 3}, {140, 4}, {120, 2}, {110, 1}}) {
    log.deliver(game.callbacks(), ev(ts, seq), 200);
  }
  CHECK(game.visible == std::vector<std::uint64_t>{100, 110, 120, 130, 140});
  CHECK(log.stats().rollbacks == 2);
  CHECK(log.stats().undone == 5);
}

TEST_CASE("empty undo is a single apply") {
  DeliveryLog log;
  Trace game;
  log.apply_directive(game.callbacks(), RollbackDirective{{}, {ev(5, 0)}});
  CHECK(game.calls == std::vector<std::string>{"apply(5)"});
}

TEST_CASE("duplicates and stale messages are dropped") {
  DeliveryLog log(2000);
  Trace game;
  log.deliver(game.callbacks(), ev(100, 0), 100);
  CHECK(std::holds_alternative<DropDuplicate>(log.on_deliver(ev(100, 0), 100)));
  log.deliver(game.callbacks(), ev(5000, 1), 5000);
  CHECK(std::holds_alternative<DropDuplicate>(log.on_deliver(ev(100, 0), 5000)));
  CHECK(std::holds_alternative<DropBeyondWindow>(log.on_deliver(ev(2000, 7), 5000)));
  log.deliver(game.callbacks(), ev(2000, 7), 5000);
  CHECK(log.stats().beyond_window == 1);
  CHECK(game.visible == std::vector<std::uint64_t>{100, 5000});
}

TEST_CASE("duplicate delivery never produces a directive") {
  DeliveryLog log;
  Trace game;
  for (std::uint32_t i = 0; i < 10; ++i) log.deliver(game.callbacks(), ev(100 + 10 * i, i), 300);
  for (std::uint32_t i = 0; i < 10; ++i)
    CHECK(std::holds_alternative<DropDuplicate>(log.on_deliver(ev(100 + 10 * i, i), 300)));
}

TEST_CASE("callback failure leaves the log unchanged") {
  DeliveryLog log;
  Trace game;
  log.deliver(game.callbacks(), ev(100, 0), 200);
  log.deliver(game.callbacks(), ev(140, 2), 200);
  const auto before = stamps(log.applied());
  RollbackCallbacks failing{[](const pdu::Message&) { throw std::runtime_error("boom"); }, [](const pdu::Message&) {}};
  const auto d = std::get<RollbackDirective>(log.on_deliver(ev(120, 1), 200));
  CHECK(error_of([&] { log.apply_directive(failing, d); }) == Errc::CallbackFailure);
  CHECK(stamps(log.applied()) == before);
}

TEST_CASE("undo is exactly the applied messages newer than the late one") {
  std::mt19937_64 rng(17);
  DeliveryLog log(1'000'000);
  Trace game;
  for (std::uint32_t i = 0; i < 300; ++i) {
    const pdu::Message m = ev(rng() % 1000, i);
    const auto outcome = log.on_deliver(m, 1000);
    if (const auto* d = std::get_if<RollbackDirective>(&outcome)) {
      const auto applied = log.applied();
      const auto newer =
          std::count_if(applied.begin(), applied.end(), [&](const pdu::Message& a) { return key_of(m) < key_of(a); });
      CHECK(d->undo.size() == static_cast<std::size_t>(newer));
    }
    log.deliver(game.callbacks(), m, 1000);
  }
}

TEST_CASE("cross-sender ties order by sender") {
  DeliveryLog log;
  Trace game;
  log.deliver(game.callbacks(), ev(100, 0, 2), 100);
  const auto outcome = log.on_deliver(ev(100, 0, 1), 100);
  REQUIRE(std::holds_alternative<RollbackDirective>(outcome));
  CHECK(std::get<RollbackDirective>(outcome).undo.size() == 1);
}

TEST_CASE("prune forgets old entries") {
  DeliveryLog log(2000);
  Trace game;
  log.deliver(game.callbacks(), ev(100, 0), 100);
  log.deliver(game.callbacks(), ev(3000, 1), 3000);
  log.prune(3000);
  CHECK(log.size() == 1);
}
