use alloc::vec::Vec;

use crate::phy::Direction;

/// Constant-bit-rate packet source, periodic from `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrafficSource {
    pub ue_id: usize,
    pub direction: Direction,
    pub packet_bytes: u64,
    pub interval_us: u64,
    pub next_arrival_us: u64,
}

impl TrafficSource {
    pub fn new(ue_id: usize, direction: Direction, packet_bytes: u64, interval_us: u64) -> Self {
        Self {
            ue_id,
            direction,
            packet_bytes,
            interval_us,
            next_arrival_us: 0,
        }
    }

    /// Consumes the arrivals before `t_us` and returns the bytes they carry.
    pub fn take_until(&mut self, t_us: u64) -> u64 {
        if self.interval_us == 0 || self.next_arrival_us >= t_us {
            return 0;
        }
        let n = (t_us - self.next_arrival_us).div_ceil(self.interval_us);
        self.next_arrival_us += n * self.interval_us;
        n * self.packet_bytes
    }
}

/// Arrival instants of `src` within `[t0, t1)`.
pub fn cbr_arrivals(src: &TrafficSource, t0_us: u64, t1_us: u64) -> Vec<u64> {
    if src.interval_us == 0 || t1_us <= t0_us {
        return Vec::new();
    }
    let first = t0_us.div_ceil(src.interval_us);
    (first..)
        .map(|k| k * src.interval_us)
        .take_while(|&t| t < t1_us)
        .collect()
}
