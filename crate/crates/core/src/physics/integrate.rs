use super::{BodyState, ForceSet};
use crate::Vec3;

/// Angular damping rate (1/s) from the airframe's angular friction: it grows
/// with the square of airspeed.
pub fn angular_damping_rate(angular_frictions: f64, speed: f64) -> f64 {
    angular_frictions * speed * speed
}

/// Advances `state` by one semi-implicit Euler step of length `dt`.
///
/// Velocity is updated from `forces.total_move` first and the new velocity
/// moves the position. Angular velocity takes the moment (unit inertia) and
/// is then damped implicitly at `angular_damping` 1/s; the orientation is
/// rotated by the new angular velocity.
pub fn integrate(state: &BodyState, forces: &ForceSet, moment: &Vec3, angular_damping: f64, dt: f64) -> BodyState {
    debug_assert!(dt > 0.0);
    let linear_velocity = state.linear_velocity + forces.total_move / state.mass * dt;
    let position = state.position + linear_velocity * dt;
    let angular_velocity = (state.angular_velocity + moment * dt) / (1.0 + angular_damping * dt);
    let spun = BodyState {
        angular_velocity,
        ..*state
    };
    BodyState {
        position,
        orientation: spun.rotated(dt),
        linear_velocity,
        angular_velocity,
        mass: state.mass,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::{
        compute_forces, compute_moments, forces::tests::f16_params, stall_factor, AtmosphereModel, ControlInput, Euler,
        GRAVITY,
    };
    use approx::assert_relative_eq;

    fn zero_forces() -> ForceSet {
        ForceSet::new(Vec3::zeros(), Vec3::zeros(), Vec3::zeros(), Vec3::zeros())
    }

    #[test]
    fn free_drift_moves_by_velocity() {
        let s = BodyState {
            position: Vec3::new(1.0, 2.0, 3.0),
            orientation: Euler::new(0.1, 0.2, 0.3),
            linear_velocity: Vec3::new(10.0, -4.0, 25.0),
            ..BodyState::default()
        };
        let next = integrate(&s, &zero_forces(), &Vec3::zeros(), 0.0, 0.02);
        assert_eq!(next.position, s.position + s.linear_velocity * 0.02);
        assert_eq!(next.linear_velocity, s.linear_velocity);
        assert_relative_eq!(next.orientation.roll, 0.1, epsilon = 1e-12);
        assert_relative_eq!(next.orientation.pitch, 0.2, epsilon = 1e-12);
        assert_relative_eq!(next.orientation.yaw, 0.3, epsilon = 1e-12);
    }

    #[test]
    fn one_gravity_step() {
        let s = BodyState::default();
        let g = ForceSet::new(
            Vec3::zeros(),
            Vec3::zeros(),
            Vec3::zeros(),
            Vec3::new(0.0, -GRAVITY, 0.0),
        );
        let next = integrate(&s, &g, &Vec3::zeros(), 0.0, 0.02);
        assert_eq!(next.linear_velocity.y, -GRAVITY * 0.02);
        assert_eq!(next.position.y, -GRAVITY * 0.02 * 0.02);
    }

    #[test]
    fn step_size_matters_for_euler() {
        let s = BodyState::default();
        let g = ForceSet::new(
            Vec3::zeros(),
            Vec3::zeros(),
            Vec3::zeros(),
            Vec3::new(0.0, -GRAVITY, 0.0),
        );
        let two = integrate(
            &integrate(&s, &g, &Vec3::zeros(), 0.0, 0.01),
            &g,
            &Vec3::zeros(),
            0.0,
            0.01,
        );
        let one = integrate(&s, &g, &Vec3::zeros(), 0.0, 0.02);
        // First order scheme: same velocity, different position.
        assert_relative_eq!(two.linear_velocity.y, one.linear_velocity.y, max_relative = 1e-12);
        assert_ne!(two.position.y, one.position.y);
    }

    #[test]
    fn integrate_is_bit_reproducible() {
        let p = f16_params();
        let atmo = AtmosphereModel::default();
        let mut s = BodyState::level(Vec3::new(0.0, 3000.0, 0.0), 0.7, 240.0);
        s.angular_velocity = Vec3::new(0.1, -0.02, 0.4);
        let c = ControlInput::new(0.3, 0.1, -0.6, 0.8, 0.0, false);
        let run = || {
            let mut st = s;
            for _ in 0..500 {
                let f = compute_forces(&st, &c, &p, &atmo);
                let q_z = stall_factor(&st, atmo.density(st.altitude()), p.reference_dynamic_pressure);
                let m = compute_moments(&c, &p, q_z);
                let d = angular_damping_rate(p.angular_frictions, st.speed());
                st = integrate(&st, &f, &m, d, 0.02);
            }
            st
        };
        let a = run();
        let b = run();
        assert_eq!(a.position.map(f64::to_bits), b.position.map(f64::to_bits));
        assert_eq!(a.orientation.yaw.to_bits(), b.orientation.yaw.to_bits());
    }

    #[test]
    fn angles_stay_within_invariants_through_a_loop() {
        let mut s = BodyState::level(Vec3::new(0.0, 3000.0, 0.0), 0.0, 200.0);
        s.angular_velocity = Vec3::new(1.0, 0.0, 0.0);
        for _ in 0..400 {
            s = integrate(&s, &zero_forces(), &Vec3::zeros(), 0.0, 0.02);
            let e = s.orientation;
            assert!(e.pitch.abs() <= std::f64::consts::FRAC_PI_2);
            assert!(e.roll > -std::f64::consts::PI && e.roll <= std::f64::consts::PI);
            assert!(e.yaw > -std::f64::consts::PI && e.yaw <= std::f64::consts::PI);
        }
    }
}
