//! Simplified broadcast channel: every node in the area hears every frame
//! after its transmission time, with optional independent loss.

use num_traits::{FromPrimitive, Num};
use rand::Rng;

use crate::time::SimTime;

/// Transmission time of `frame_bytes` at `bitrate` bits/s, in seconds.
///
/// Generic so that it can be evaluated exactly with a rational type.
pub fn airtime<T: Num + FromPrimitive>(frame_bytes: usize, bitrate: T) -> T {
    T::from_usize(8 * frame_bytes).expect("frame size representable") / bitrate
}

/// Airtime rounded to the kernel's nanosecond clock.
pub fn airtime_nanos(frame_bytes: usize, bitrate: f64) -> SimTime {
    SimTime::from_secs_f64(airtime(frame_bytes, bitrate))
}

/// Node 0 sits at the center; the others are uniform over the square.
pub fn place_nodes<R: Rng + ?Sized>(
    n_nodes: usize,
    area_side: f64,
    rng: &mut R,
) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n_nodes);
    if n_nodes == 0 {
        return out;
    }
    out.push((area_side / 2.0, area_side / 2.0));
    for _ in 1..n_nodes {
        out.push(uniform_point(area_side, rng));
    }
    out
}

pub fn uniform_point<R: Rng + ?Sized>(area_side: f64, rng: &mut R) -> (f64, f64) {
    (
        rng.random_range(0.0..=area_side),
        rng.random_range(0.0..=area_side),
    )
}

/// Beacon schedule of one node: a random phase in `[0, period)` then every period.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BeaconSchedule {
    pub phase: SimTime,
    pub period: SimTime,
}

impl BeaconSchedule {
    pub fn random<R: Rng + ?Sized>(gamma: f64, rng: &mut R) -> Self {
        let period = SimTime::from_secs_f64(1.0 / gamma);
        let phase = SimTime(rng.random_range(0..period.as_nanos().max(1)));
        BeaconSchedule { phase, period }
    }

    /// Generation instants strictly before `end`.
    pub fn times(&self, end: SimTime) -> impl Iterator<Item = SimTime> + '_ {
        let period = self.period;
        std::iter::successors(Some(self.phase), move |t| Some(*t + period))
            .take_while(move |t| *t < end)
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;

    use super::*;
    use crate::SimRng;

    #[test]
    fn base_frame_airtime() {
        assert_eq!(airtime_nanos(300, 6e6), SimTime::from_micros(400));
        assert!((airtime(350, 6e6f64) - airtime(300, 6e6f64) - 200.0 / 3.0 * 1e-6).abs() < 1e-15);
    }

    #[test]
    fn single_node_at_center() {
        let mut rng = SimRng::seed_from_u64(1);
        assert_eq!(place_nodes(1, 200.0, &mut rng), vec![(100.0, 100.0)]);
        let pts = place_nodes(30, 200.0, &mut rng);
        assert_eq!(pts.len(), 30);
        assert!(pts
            .iter()
            .all(|&(x, y)| (0.0..=200.0).contains(&x) && (0.0..=200.0).contains(&y)));
    }

    #[test]
    fn beacon_count_and_spacing() {
        let s = BeaconSchedule {
            phase: SimTime::from_millis(30),
            period: SimTime::from_millis(100),
        };
        let t: Vec<_> = s.times(SimTime::from_millis(2000)).collect();
        assert_eq!(t.len(), 20);
        assert_eq!(
            &t[..3],
            &[
                SimTime::from_millis(30),
                SimTime::from_millis(130),
                SimTime::from_millis(230)
            ]
        );
        let mut rng = SimRng::seed_from_u64(2);
        for _ in 0..100 {
            let s = BeaconSchedule::random(10.0, &mut rng);
            assert!(s.phase < s.period);
            assert_eq!(s.times(SimTime::from_millis(2000)).count(), 20);
        }
    }
}
