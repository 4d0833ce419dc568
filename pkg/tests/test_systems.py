import math

import numpy as np
import pytest

from knr import ode, systems


class TestVanDerPol:
    def setup_method(self):
        self.plant = systems.vdp()

    def test_origin_equilibrium(self):
        assert np.allclose(self.plant.dynamics(np.zeros(2), np.zeros(1)), 0.0)

    def test_direct_substitution(self):
        f = self.plant.dynamics(np.array([1.0, 1.0]), np.zeros(1))
        assert np.allclose(f, [1.0, -1.0])

    def test_hand_jacobian(self):
        J = self.plant.jac_x(np.array([1.0, 1.0]), np.zeros(1))
        assert np.allclose(J, [[0.0, 1.0], [-3.0, 0.0]])


class TestCrane:
    def setup_method(self):
        self.plant = systems.crane()

    def test_downward_equilibrium(self):
        assert np.allclose(self.plant.dynamics(np.zeros(4), np.zeros(1)), 0.0)

    def test_accelerations_at_rest(self):
        f = self.plant.dynamics(np.zeros(4), np.array([6.5]))
        assert np.allclose(f, [0.0, 1.0, 0.0, -4.0 / 3.0], atol=1e-12)

    def test_mass_matrix_determinant_at_quarter_turn(self):
        M, m_p, l = 6.5, 0.5, 0.75
        det = m_p * l * l * (M + m_p * math.sin(math.pi / 2) ** 2)
        assert det == pytest.approx(1.96875)

    def test_energy_conserved_without_force(self):
        x0 = np.array([0.0, 0.3, 0.5, 0.0])
        flow = ode.Flow(4, lambda t, x: self.plant.dynamics(x, np.zeros(1)))
        traj = ode.simulate(flow, x0, 0.0, 10.0, 0.01)
        e0 = systems.crane_energy(x0)
        energies = np.array([systems.crane_energy(s) for s in traj.samples])
        assert np.abs(energies - e0).max() <= 1e-6 * abs(e0)

    def test_rejects_bad_parameters(self):
        with pytest.raises(ValueError):
            systems.crane(M=-1.0)


class TestCar:
    def setup_method(self):
        self.plant = systems.car()

    def test_straight_drive(self):
        f = self.plant.dynamics(np.zeros(3), np.array([1.0, 1.0]))
        assert np.allclose(f, [0.1, 0.0, 0.0])

    def test_single_wheel(self):
        f = self.plant.dynamics(np.zeros(3), np.array([0.0, 1.0]))
        assert np.allclose(f, [0.05, 0.0, 0.25])

    def test_rotated_straight_drive(self):
        f = self.plant.dynamics(np.array([0.0, 0.0, math.pi / 2]), np.array([1.0, 1.0]))
        assert np.allclose(f, [0.0, 0.1, 0.0], atol=1e-15)

    def test_equal_wheels_keep_heading(self):
        u = np.array([1.3, 1.3])
        flow = ode.Flow(3, lambda t, x: self.plant.dynamics(x, u))
        traj = ode.simulate(flow, [0.0, 0.0, 0.7], 0.0, 5.0, 0.01)
        assert np.abs(traj.samples[:, 2] - 0.7).max() <= 1e-12
        # straight line: displacement stays parallel to the heading
        d = traj.samples[-1, :2]
        assert abs(d[0] * math.sin(0.7) - d[1] * math.cos(0.7)) <= 1e-12

    def test_fused_sensitivity_step_matches_generic(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            x = rng.uniform(-3.0, 3.0, 3)
            u = rng.uniform(-6.0, 6.0, 2)
            xi = rng.standard_normal((3, 2))
            fx, fxi = self.plant.sensitivity_step(x, xi.copy(), u, 0.01)
            flow = ode.Flow(3, lambda t, s: self.plant.dynamics(s, u))
            # one generic coupled RK4 step for comparison
            half = 0.005
            def g(state, sens):
                return (self.plant.dynamics(state, u),
                        self.plant.jac_x(state, u) @ sens + self.plant.jac_u(state, u))
            k1x, k1s = g(x, xi)
            k2x, k2s = g(x + half * k1x, xi + half * k1s)
            k3x, k3s = g(x + half * k2x, xi + half * k2s)
            k4x, k4s = g(x + 0.01 * k3x, xi + 0.01 * k3s)
            gx = x + (0.01 / 6) * (k1x + 2 * (k2x + k3x) + k4x)
            gs = xi + (0.01 / 6) * (k1s + 2 * (k2s + k3s) + k4s)
            assert np.abs(fx - gx).max() <= 1e-13
            assert np.abs(fxi - gs).max() <= 1e-13


@pytest.mark.parametrize("name", ["vdp", "crane", "car"])
def test_jacobians_match_finite_differences(name):
    plant = systems.get_system(name)
    rng = np.random.default_rng(hash(name) % 2 ** 32)
    h = 1e-6
    for _ in range(100):
        x = rng.uniform(-3.0, 3.0, plant.n)
        u = rng.uniform(-10.0, 10.0, plant.m)
        Jx = plant.jac_x(x, u)
        Ju = plant.jac_u(x, u)
        fd_x = np.empty_like(Jx)
        for j in range(plant.n):
            dx = np.zeros(plant.n)
            dx[j] = h
            fd_x[:, j] = (plant.dynamics(x + dx, u) - plant.dynamics(x - dx, u)) / (2 * h)
        fd_u = np.empty_like(Ju)
        for j in range(plant.m):
            du = np.zeros(plant.m)
            du[j] = h
            fd_u[:, j] = (plant.dynamics(x, u + du) - plant.dynamics(x, u - du)) / (2 * h)
        scale = max(1.0, np.abs(fd_x).max())
        assert np.abs(Jx - fd_x).max() <= 1e-5 * scale
        assert np.abs(Ju - fd_u).max() <= 1e-5 * max(1.0, np.abs(fd_u).max())


class TestReferences:
    def setup_method(self):
        self.refs = systems.references()

    def test_vdp_initial_value(self):
        assert self.refs["vdp"](0.0)[0] == pytest.approx(math.pi / 6, abs=1e-9)

    def test_crane_form(self):
        assert self.refs["crane"](7.3)[0] == pytest.approx(math.sin(0.73), abs=1e-12)

    def test_car_starts_at_initial_position(self):
        assert np.allclose(self.refs["car"](0.0), [0.0, 3.0])

    def test_car_branch_boundary(self):
        # polynomial branch evaluated at t = 5 (own oracle): the two
        # branches nearly agree; the t >= 5 branch owns the boundary point
        below = np.array([
            -0.0001 * 125 + 0.25 * 5,
            0.0475 * 125 - 0.3601 * 25 + 0.3 * 5 + 3.0,
        ])
        assert np.allclose(below, [1.2375, 1.435])
        at5 = self.refs["car"](5.0)
        assert np.allclose(at5, [5 * math.sin(0.25), 3 * math.sin(0.5)])
        assert np.allclose(self.refs["car"](4.999999), below, atol=1e-4)

    def test_defined_beyond_horizon(self):
        for name, ref in self.refs.items():
            value = ref(ref.t_max + 0.5)
            assert np.isfinite(value).all()


class TestBases:
    def setup_method(self):
        self.bases = systems.bases()

    def test_vdp_lift(self):
        z = self.bases["vdp"].lift(np.array([2.0, 3.0]), np.array([0.5]))
        assert np.allclose(z, [2.0, 3.0, 4.0, 12.0])

    def test_crane_lift(self):
        z = self.bases["crane"].lift(np.zeros(4), np.array([1.0]))
        assert np.allclose(z, [0.0, 0.0, 0.0, 0.0, 0.0, 1.0])

    def test_car_lift(self):
        z = self.bases["car"].lift(np.array([1.0, 2.0, 0.0]), np.array([3.0, 4.0]))
        assert np.allclose(z, [1.0, 2.0, 0.0, 0.0, 3.0, 0.0, 4.0])

    def test_first_coordinates_are_the_state(self):
        rng = np.random.default_rng(9)
        for name, basis in self.bases.items():
            for _ in range(20):
                x = rng.uniform(-2.0, 2.0, basis.n)
                u = rng.uniform(-2.0, 2.0, basis.m)
                assert np.array_equal(basis.lift(x, u)[:basis.n], x)

    def test_dimensions(self):
        assert self.bases["vdp"].N == 4
        assert self.bases["crane"].N == 6
        assert self.bases["car"].N == 7

    def test_car_lift_jacobians_match_fd(self):
        basis = self.bases["car"]
        rng = np.random.default_rng(10)
        h = 1e-6
        for _ in range(20):
            x = rng.uniform(-2.0, 2.0, 3)
            u = rng.uniform(-2.0, 2.0, 2)
            Ju = basis.input_jacobian(x, u)
            Jx = basis.state_jacobian(x, u)
            for j in range(2):
                du = np.zeros(2)
                du[j] = h
                fd = (basis.lift(x, u + du) - basis.lift(x, u - du)) / (2 * h)
                assert np.abs(Ju[:, j] - fd).max() <= 1e-6
            for j in range(3):
                dx = np.zeros(3)
                dx[j] = h
                fd = (basis.lift(x + dx, u) - basis.lift(x - dx, u)) / (2 * h)
                assert np.abs(Jx[:, j] - fd).max() <= 1e-6

    def test_identity_basis_roundtrip_name(self):
        basis = systems.identity_basis(3, 2)
        again = systems.get_basis(basis.name)
        assert again.n == 3 and again.m == 2 and again.N == 3


def test_output_selection_matrix():
    plant = systems.car()
    H = plant.output_matrix
    assert H.shape == (2, 3)
    x = np.array([1.0, 2.0, 3.0])
    assert np.allclose(H @ x, plant.output(x))


def test_system_requires_square_sensitivity():
    with pytest.raises(ValueError):
        systems.SystemModel(
            name="bad", n=2, m=1, k=2,
            dynamics=lambda x, u: x, jac_x=lambda x, u: np.eye(2),
            jac_u=lambda x, u: np.zeros((2, 1)), output_rows=(0, 1))
