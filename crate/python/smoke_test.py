"""Smoke test for the ihomp_py extension module."""

import pathlib
import tempfile

import ihomp_py

CONFIGS = pathlib.Path(__file__).resolve().parent.parent / "configs"


def main():
    assert ihomp_py.required_iterations(0.9, 0.01) == 66
    assert abs(ihomp_py.theorem_bound(4, 0.0, 0.9, 0.01, 2.0) - 0.02) < 1e-12

    mdp = ihomp_py.TabularMdp.gridworld(5, 5, (4, 4), noise=0.1, gamma=0.9)
    assert (mdp.n_states, mdp.n_actions) == (25, 4)
    v_star, actions = mdp.value_iteration()
    assert len(v_star) == 25 and len(actions) == 25
    uniform = mdp.evaluate([[0.25] * 4] * 25)
    assert all(u <= v + 1e-6 for u, v in zip(uniform, v_star))

    partition = ihomp_py.Partition.grid([0.0, 0.0], [1.0, 1.0], [2, 2])
    assert partition.class_count == 4
    assert partition.class_index([0.25, 0.25]) == 0

    hier = ihomp_py.HierPolicy.uniform(partition, 4)
    assert hier.option_count == 4
    assert hier.select([0.9, 0.9]) == partition.class_index([0.9, 0.9])
    assert abs(sum(hier.action_distribution(0, [0.1, 0.1])) - 1.0) < 1e-12
    assert ihomp_py.HierPolicy.parse(hier.to_text()).to_text() == hier.to_text()

    policy, errors, eta = ihomp_py.tabular_ihomp(5, 5, (4, 4), [2, 2], 66)
    assert errors[-1] <= 0.01 and eta <= 1e-9
    assert policy.option_count == 4

    try:
        ihomp_py.required_iterations(1.0, 0.1)
    except ihomp_py.IhompError:
        pass
    else:
        raise AssertionError("gamma = 1 must be rejected")

    exp = ihomp_py.Experiment(str(CONFIGS / "gridworld_theorem1.cfg"))
    exp.validate()
    with tempfile.TemporaryDirectory() as out:
        (result,) = exp.run(out=out, seed=0)
        assert result.seed == 0
        assert (pathlib.Path(result.dir) / "curve.csv").exists()
        assert len(result.curve) == 67

    print("ihomp_py smoke test passed")


if __name__ == "__main__":
    main()
