//! Named random substreams for one replication.
//!
//! Every substream is a ChaCha8 generator keyed by the replication seed and
//! selected by its own stream number, so the draws of one substream do not
//! depend on how often the others are consumed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::queue::QueueId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Substream {
    Interarrival = 0,
    ServiceI = 1,
    ServiceJ = 2,
    TieBreak = 3,
    DeltaLambda = 4,
}

#[derive(Debug, Clone)]
pub struct RngStream {
    interarrival: ChaCha8Rng,
    service_i: ChaCha8Rng,
    service_j: ChaCha8Rng,
    tie_break: ChaCha8Rng,
    delta_lambda: ChaCha8Rng,
}

fn substream(seed: u64, which: Substream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream {
            interarrival: substream(seed, Substream::Interarrival),
            service_i: substream(seed, Substream::ServiceI),
            service_j: substream(seed, Substream::ServiceJ),
            tie_break: substream(seed, Substream::TieBreak),
            delta_lambda: substream(seed, Substream::DeltaLambda),
        }
    }

    pub fn get(&mut self, which: Substream) -> &mut ChaCha8Rng {
        match which {
            Substream::Interarrival => &mut self.interarrival,
            Substream::ServiceI => &mut self.service_i,
            Substream::ServiceJ => &mut self.service_j,
            Substream::TieBreak => &mut self.tie_break,
            Substream::DeltaLambda => &mut self.delta_lambda,
        }
    }

    pub fn interarrival(&mut self, lambda: f64) -> f64 {
        exponential(&mut self.interarrival, lambda)
    }

    pub fn service(&mut self, queue: QueueId, mu: f64) -> f64 {
        match queue {
            QueueId::I => exponential(&mut self.service_i, mu),
            QueueId::J => exponential(&mut self.service_j, mu),
        }
    }

    /// Fair coin; `true` selects queue i.
    pub fn coin(&mut self) -> bool {
        self.tie_break.random_bool(0.5)
    }

    pub fn uniform_delta_lambda(&mut self, low: f64, high: f64) -> f64 {
        self.delta_lambda.random_range(low..high)
    }
}

fn exponential<R: Rng>(rng: &mut R, rate: f64) -> f64 {
    Exp::new(rate).expect("rate validated positive").sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn substreams_ignore_interleaving() {
        let mut a = RngStream::new(9);
        let mut b = RngStream::new(9);
        let xs: Vec<f64> = (0..100).map(|_| a.interarrival(2.0)).collect();
        let mut ys = Vec::new();
        for _ in 0..100 {
            b.service(QueueId::I, 1.0);
            b.coin();
            ys.push(b.interarrival(2.0));
        }
        assert_eq!(xs, ys);
    }

    #[test]
    fn streams_differ() {
        let mut a = RngStream::new(1);
        let x = a.service(QueueId::I, 1.0);
        let y = a.service(QueueId::J, 1.0);
        assert_ne!(x, y);
        assert_ne!(RngStream::new(1).interarrival(1.0), RngStream::new(2).interarrival(1.0));
    }
}
