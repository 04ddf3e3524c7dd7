//! Per-stream age-of-information bookkeeping.

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AoiError {
    #[error("arrival probability must lie in [0, 1], got {0}")]
    BadProbability(f64),
    #[error("delivery reported without a scheduled, buffered packet")]
    DeliveryWithoutPacket,
    #[error("empty trace")]
    EmptyTrace,
    #[error("stream traces have different lengths ({0} vs {1})")]
    RaggedTrace(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamState {
    /// Age at the destination.
    pub age: u64,
    /// Age of the buffered packet.
    pub system_time: u64,
    pub has_packet: bool,
    pub lambda: f64,
}

impl StreamState {
    /// Slot-one state: age 1, fresh packet iff one arrived.
    pub fn initial(lambda: f64, arrival: bool) -> Result<Self, AoiError> {
        check_probability(lambda)?;
        Ok(Self { age: 1, system_time: 0, has_packet: arrival, lambda })
    }

    pub fn step(&self, scheduled: bool, delivered: bool, arrival: bool) -> Result<Self, AoiError> {
        if delivered && !(scheduled && self.has_packet) {
            return Err(AoiError::DeliveryWithoutPacket);
        }
        let age = if delivered { self.system_time + 1 } else { self.age + 1 };
        let system_time = if arrival { 0 } else { self.system_time + 1 };
        let has_packet = arrival || (self.has_packet && !delivered);
        Ok(Self { age, system_time, has_packet, lambda: self.lambda })
    }

    /// Age drop obtained if the buffered packet were delivered now.
    pub fn reduction_weight(&self) -> f64 {
        if self.has_packet {
            self.age.saturating_sub(self.system_time) as f64
        } else {
            0.0
        }
    }
}

fn check_probability(p: f64) -> Result<(), AoiError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(AoiError::BadProbability(p))
    }
}

pub fn sample_arrival<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> Result<bool, AoiError> {
    check_probability(lambda)?;
    Ok(rng.random_bool(lambda))
}

pub fn delivery_predicate(snr: f64, scheduled: bool, has_packet: bool, gamma_th: f64) -> bool {
    debug_assert!(gamma_th > 0.0);
    scheduled && has_packet && snr >= gamma_th
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AoiRecord {
    pub age: u64,
    pub system_time: u64,
    pub has_packet: bool,
    pub scheduled: bool,
    pub delivered: bool,
}

/// Slot-by-slot records for both streams, indexed by [`crate::Side::index`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AoiTrace {
    pub streams: [Vec<AoiRecord>; 2],
}

impl AoiTrace {
    pub fn push(&mut self, stream: usize, state: &StreamState, scheduled: bool, delivered: bool) {
        self.streams[stream].push(AoiRecord {
            age: state.age,
            system_time: state.system_time,
            has_packet: state.has_packet,
            scheduled,
            delivered,
        });
    }

    pub fn horizon(&self) -> usize {
        self.streams[0].len()
    }
}

pub fn average_sum_aoi(trace: &AoiTrace) -> Result<f64, AoiError> {
    let [t, r] = &trace.streams;
    if t.len() != r.len() {
        return Err(AoiError::RaggedTrace(t.len(), r.len()));
    }
    if t.is_empty() {
        return Err(AoiError::EmptyTrace);
    }
    let total: u64 = t.iter().chain(r).map(|rec| rec.age).sum();
    Ok(total as f64 / (2 * t.len()) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn st(age: u64, system_time: u64, has_packet: bool) -> StreamState {
        StreamState { age, system_time, has_packet, lambda: 0.6 }
    }

    fn triple(s: StreamState) -> (u64, u64, bool) {
        (s.age, s.system_time, s.has_packet)
    }

    #[test]
    fn arrivals() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sample_arrival(1.0, &mut rng).unwrap());
        assert!(!sample_arrival(0.0, &mut rng).unwrap());
        assert!(sample_arrival(1.5, &mut rng).is_err());
        assert!(sample_arrival(f64::NAN, &mut rng).is_err());
        let hits = (0..10_000).filter(|_| sample_arrival(0.6, &mut rng).unwrap()).count();
        let mean = hits as f64 / 1e4;
        assert!((0.58..=0.62).contains(&mean), "{mean}");
    }

    #[test]
    fn step_examples() {
        assert_eq!(triple(st(5, 2, true).step(true, true, false).unwrap()), (3, 3, false));
        assert_eq!(triple(st(5, 2, true).step(false, false, false).unwrap()), (6, 3, true));
        assert_eq!(triple(st(5, 4, false).step(false, false, true).unwrap()), (6, 0, true));
        assert!(st(5, 4, false).step(true, true, false).is_err());
        assert!(st(5, 4, true).step(false, true, false).is_err());
    }

    #[test]
    fn scheduled_but_failed_keeps_packet() {
        assert_eq!(triple(st(5, 2, true).step(true, false, false).unwrap()), (6, 3, true));
    }

    #[test]
    fn predicate() {
        assert!(delivery_predicate(5.0, true, true, 3.0));
        assert!(!delivery_predicate(5.0, false, true, 3.0));
        assert!(!delivery_predicate(5.0, true, false, 3.0));
        assert!(!delivery_predicate(2.999, true, true, 3.0));
        assert!(delivery_predicate(3.0, true, true, 3.0));
    }

    #[test]
    fn weights() {
        assert_eq!(st(5, 2, true).reduction_weight(), 3.0);
        assert_eq!(st(5, 2, false).reduction_weight(), 0.0);
        assert_eq!(st(7, 0, true).reduction_weight(), 7.0);
    }

    #[test]
    fn average_examples() {
        let mut trace = AoiTrace::default();
        for a in [1, 2] {
            for k in 0..2 {
                trace.push(k, &st(a, 0, false), false, false);
            }
        }
        assert_eq!(average_sum_aoi(&trace).unwrap(), 1.5);
        assert_eq!(average_sum_aoi(&AoiTrace::default()), Err(AoiError::EmptyTrace));
        trace.streams[1].pop();
        assert!(matches!(average_sum_aoi(&trace), Err(AoiError::RaggedTrace(2, 1))));
    }

    #[test]
    fn never_delivered_closed_form() {
        for n in [1u64, 7, 10, 50, 100] {
            let mut trace = AoiTrace::default();
            let mut s = [st(1, 0, true), st(1, 0, false)];
            for slot in 0..n {
                for k in 0..2 {
                    trace.push(k, &s[k], false, false);
                    s[k] = s[k].step(false, false, slot % 3 == 0).unwrap();
                }
            }
            assert_eq!(average_sum_aoi(&trace).unwrap(), (n + 1) as f64 / 2.0);
        }
    }

    proptest! {
        #[test]
        fn invariants_hold(
            moves in prop::collection::vec((any::<bool>(), any::<bool>(), any::<bool>()), 1..60)
        ) {
            let mut s = st(1, 0, true);
            for (sched, ok, arr) in moves {
                let delivered = sched && ok && s.has_packet;
                let next = s.step(sched, delivered, arr).unwrap();
                prop_assert!(next.age >= 1);
                if next.has_packet {
                    prop_assert!(next.system_time <= next.age);
                }
                if delivered {
                    prop_assert!(next.age <= s.age + 1);
                }
                if s.has_packet && !sched {
                    prop_assert!(next.has_packet);
                }
                s = next;
            }
        }

        #[test]
        fn suppressing_deliveries_never_helps(
            moves in prop::collection::vec((any::<bool>(), any::<bool>()), 1..60)
        ) {
            let mut with = st(1, 0, false);
            let mut without = st(1, 0, false);
            for (try_send, arr) in moves {
                let delivered = try_send && with.has_packet;
                with = with.step(try_send, delivered, arr).unwrap();
                without = without.step(false, false, arr).unwrap();
                prop_assert!(without.age >= with.age);
            }
        }
    }
}
