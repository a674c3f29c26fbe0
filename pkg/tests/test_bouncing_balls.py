import numpy as np
import pytest
from scipy import ndimage

from world.bouncing_balls import BounceWorld, PlacementError, _reflect_walls, integrate_bounce, kinetic_energy, \
    rasterize, simulate_bounce


def test_frames_are_binary_patches():
    frames = simulate_bounce(BounceWorld(), 50, np.random.default_rng(0))

    assert frames.shape == (50, 900)
    assert set(np.unique(frames)) <= {0., 1.}
    assert np.all(frames.sum(axis=1) > 0)


def test_separate_balls_are_separate_components():
    world = BounceWorld()
    frame = rasterize(world, np.array([[5., 5.], [15., 15.], [25., 25.]])).reshape(30, 30)

    _, n_components = ndimage.label(frame)
    assert n_components == 3


def test_kinetic_energy_is_conserved():
    trajectory = integrate_bounce(BounceWorld(), 300, np.random.default_rng(1))
    energy = kinetic_energy(trajectory.velocities)

    np.testing.assert_allclose(energy, energy[0], rtol=1e-9)


def test_balls_stay_inside_the_patch():
    world = BounceWorld()
    positions = integrate_bounce(world, 300, np.random.default_rng(2)).positions

    assert positions.min() >= world.radius - 1e-9
    assert positions.max() <= world.patch_size - world.radius + 1e-9


def test_head_on_collision_exchanges_velocities():
    world = BounceWorld(n_balls=2)
    trajectory = integrate_bounce(world, 12, np.random.default_rng(0),
                                  init_positions=[[10., 15.], [20., 15.]], init_velocities=[[.5, 0.], [-.5, 0.]])

    np.testing.assert_allclose(trajectory.velocities[-1], [[-.5, 0.], [.5, 0.]])

    distances = np.linalg.norm(trajectory.positions[:, 0] - trajectory.positions[:, 1], axis=1)
    assert distances.min() >= 2 * world.radius - 1e-9


def test_walls_reflect():
    world = BounceWorld(n_balls=1)
    trajectory = integrate_bounce(world, 10, np.random.default_rng(0), init_positions=[[3., 15.]],
                                  init_velocities=[[-.5, 0.]])

    np.testing.assert_allclose(trajectory.velocities[-1], [[.5, 0.]])


def test_walls_keep_inward_velocities():
    world = BounceWorld(n_balls=2)
    high = world.patch_size - world.radius
    # Both balls sit past a wall but already move back inside.
    positions = np.array([[world.radius - .1, 15.], [high + .1, 15.]])
    velocities = np.array([[.3, .2], [-.3, .2]])

    _reflect_walls(world, positions, velocities)

    np.testing.assert_allclose(positions[:, 0], [world.radius + .1, high - .1])
    np.testing.assert_allclose(velocities, [[.3, .2], [-.3, .2]])


def test_simulation_is_reproducible():
    world = BounceWorld()
    np.testing.assert_array_equal(simulate_bounce(world, 20, np.random.default_rng(3)),
                                  simulate_bounce(world, 20, np.random.default_rng(3)))


def test_copy_frame_error():
    world = BounceWorld()
    rng = np.random.default_rng(4)
    videos = np.array([simulate_bounce(world, 100, rng) for _ in range(40)])

    assert np.mean((videos[:, 1:] - videos[:, :-1]) ** 2) == pytest.approx(.015, abs=.005)


def test_crowded_patches_fail_placement():
    with pytest.raises(PlacementError):
        simulate_bounce(BounceWorld(patch_size=10, n_balls=20, radius=2., placement_tries=50), 1,
                        np.random.default_rng(0))


@pytest.mark.parametrize('overrides', [{'n_balls': 0}, {'radius': 20.}, {'speed_range': (1., .5)}])
def test_invalid_worlds(overrides):
    with pytest.raises(ValueError):
        BounceWorld(**overrides)
