#include <doctest.h>

#include "sacr2/env.hpp"

#include "test_util.hpp"

using namespace sacr2;
using sacr2::test::same_bits;

namespace {

// independently coded per-link accumulation, kept deliberately different from
// the production routine
Vector2 fk_oracle(const Vector& q, const std::vector<Scalar>& lengths) {
  Vector2 pos{0, 0};
  for (int i = 0; i < q.size(); ++i) {
    Scalar heading = 0;
    for (int j = 0; j <= i; ++j) heading += q[j];
    pos.x() += lengths[size_t(i)] * std::cos(heading);
    pos.y() += lengths[size_t(i)] * std::sin(heading);
  }
  return pos;
}

}  // namespace

TEST_CASE("forward kinematics matches hand values") {
  const std::vector<Scalar> lengths{0.25, 0.25, 0.25, 0.25};
  Vector q = Vector::Zero(4);
  Vector2 p = forward_kinematics(q, lengths);
  CHECK(p.x() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(p.y() == doctest::Approx(0.0).epsilon(1e-12));

  q[0] = std::numbers::pi / 2;
  p = forward_kinematics(q, lengths);
  CHECK(p.x() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(p.y() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("forward kinematics matches independent accumulation oracle") {
  Rng rng(42);
  const std::vector<Scalar> lengths{0.3, 0.2, 0.25, 0.15};
  for (int trial = 0; trial < 200; ++trial) {
    Vector q(4);
    for (int i = 0; i < 4; ++i) q[i] = rng.uniform(-3.0, 3.0);
    const Vector2 a = forward_kinematics(q, lengths);
    const Vector2 b = fk_oracle(q, lengths);
    CHECK((a - b).norm() < 1e-12);
  }
}

TEST_CASE("jacobian matches finite differences of the kinematics") {
  Rng rng(7);
  const std::vector<Scalar> lengths{0.25, 0.25, 0.25, 0.25};
  for (int trial = 0; trial < 20; ++trial) {
    Vector q(4);
    for (int i = 0; i < 4; ++i) q[i] = rng.uniform(-2.0, 2.0);
    const Matrix jac = arm_jacobian(q, lengths);
    const Scalar h = 1e-7;
    for (int j = 0; j < 4; ++j) {
      Vector qp = q, qm = q;
      qp[j] += h;
      qm[j] -= h;
      const Vector2 fd = (forward_kinematics(qp, lengths) -
                          forward_kinematics(qm, lengths)) /
                         (2 * h);
      CHECK(std::abs(jac(0, j) - fd.x()) < 1e-6);
      CHECK(std::abs(jac(1, j) - fd.y()) < 1e-6);
    }
  }
}

TEST_CASE("reset is deterministic and home pose is fixed") {
  EnvConfig config;
  Rng rng1(123), rng2(123);
  const ReacherState a = reset(config, rng1);
  const ReacherState b = reset(config, rng2);
  CHECK(same_bits(a.target_position, b.target_position));
  CHECK(same_bits(a.joint_angles, b.joint_angles));

  Rng rng3(999);
  const ReacherState c = reset(config, rng3);
  CHECK(same_bits(a.ee_position, c.ee_position));  // home pose identical across resets
  CHECK(a.step_count == 0);
}

TEST_CASE("reset targets stay in the annulus over many draws") {
  EnvConfig config;
  Rng rng(5);
  for (int i = 0; i < 10000; ++i) {
    const ReacherState s = reset(config, rng);
    const Scalar r = s.target_position.norm();
    CHECK(r >= config.target_r_min);
    CHECK(r <= config.target_r_max);
  }
}

TEST_CASE("step pays the sparse reward only on success") {
  EnvConfig config;
  Rng rng(17);
  ReacherState s = reset(config, rng);
  // park the target on top of the end effector so one tiny step succeeds
  s.target_position = s.ee_position + Vector2{0.01, 0.0};
  const StepResult out = step(s, Vector::Zero(4), config);
  CHECK(out.success);
  CHECK(out.done);
  CHECK(out.reward == config.sparse_reward);
  CHECK_THROWS_AS(step(out.state, Vector::Zero(4), config), ContractViolation);
}

TEST_CASE("zero actions on a far target time out with zero return") {
  EnvConfig config;
  Rng rng(3);
  ReacherState s = reset(config, rng);
  s.target_position = -s.ee_position;  // opposite side, unreachable without moving
  Scalar total = 0;
  int steps = 0;
  for (;;) {
    const StepResult out = step(s, Vector::Zero(4), config);
    total += out.reward;
    ++steps;
    s = out.state;
    if (out.done) {
      CHECK_FALSE(out.success);
      break;
    }
  }
  CHECK(steps == config.max_steps);
  CHECK(total == 0.0);
}

TEST_CASE("actions clamp to the unit box") {
  EnvConfig config;
  Rng rng(11);
  const ReacherState s = reset(config, rng);
  Vector big(4), unit(4);
  big << 2.0, -3.0, 0.5, 10.0;
  unit << 1.0, -1.0, 0.5, 1.0;
  const StepResult a = step(s, big, config);
  const StepResult b = step(s, unit, config);
  CHECK(same_bits(a.state.joint_angles, b.state.joint_angles));
}

TEST_CASE("observation layout and purity") {
  EnvConfig config;
  Rng rng(19);
  const ReacherState s = reset(config, rng);
  const Vector obs = observe(s);
  REQUIRE(obs.size() == 16);
  CHECK(observation_dim(config) == 16);
  CHECK(obs[14] == s.target_position.x());
  CHECK(obs[15] == s.target_position.y());
  CHECK(same_bits(obs, observe(s)));  // bitwise pure
}

TEST_CASE("observations stay finite over long random rollouts") {
  EnvConfig config;
  Rng rng(29);
  long steps_seen = 0;
  ReacherState s = reset(config, rng);
  while (steps_seen < 100000) {
    Vector action(4);
    for (int i = 0; i < 4; ++i) action[i] = rng.uniform(-1, 1);
    const StepResult out = step(s, action, config);
    ++steps_seen;
    CHECK(observe(out.state).allFinite());
    s = out.done ? reset(config, rng) : out.state;
  }
}

TEST_CASE("trajectories are bitwise deterministic given seed and actions") {
  EnvConfig config;
  for (int rep = 0; rep < 2; ++rep) {
    Rng env_rng(101), act_rng(55);
    ReacherState s = reset(config, env_rng);
    static Vector first_run[50];
    for (int t = 0; t < 50; ++t) {
      Vector a(4);
      for (int i = 0; i < 4; ++i) a[i] = act_rng.uniform(-1, 1);
      const StepResult out = step(s, a, config);
      const Vector obs = observe(out.state);
      if (rep == 0)
        first_run[t] = obs;
      else
        CHECK(same_bits(first_run[t], obs));
      s = out.done ? reset(config, env_rng) : out.state;
    }
  }
}

TEST_CASE("state_from_observation inverts the encoding") {
  EnvConfig config;
  Rng rng(77);
  ReacherState s = reset(config, rng);
  for (int t = 0; t < 30; ++t) {
    Vector a(4);
    for (int i = 0; i < 4; ++i) a[i] = rng.uniform(-1, 1);
    s = step(s, a, config).state;
    if (s.terminal) s = reset(config, rng);
  }
  const ReacherState back = state_from_observation(config, observe(s));
  CHECK((back.ee_position - s.ee_position).norm() < 1e-9);
  CHECK(same_bits(back.target_position, s.target_position));
  CHECK(same_bits(back.joint_velocities, s.joint_velocities));
}

TEST_CASE("config hash tracks every field") {
  EnvConfig a, b;
  CHECK(a.hash() == b.hash());
  b.reach_threshold = 0.06;
  CHECK(a.hash() != b.hash());
  EnvConfig c;
  c.max_steps = 101;
  CHECK(a.hash() != c.hash());
}

TEST_CASE("config invariants are enforced") {
  EnvConfig bad;
  bad.target_r_max = 1.5;  // beyond arm reach 1.0
  CHECK_THROWS_AS(bad.validate(), ContractViolation);
  EnvConfig bad2;
  bad2.reach_threshold = 0;
  CHECK_THROWS_AS(bad2.validate(), ContractViolation);
}
