use std::io::{self, Write};
use std::thread;
use std::time::{Duration, Instant};

/// Token bucket refilled at `rate` bytes per second, holding at most `burst` bytes.
#[derive(Clone, Debug)]
pub struct TokenBucket {
    rate: f64,
    burst: f64,
    tokens: f64,
    last: Instant,
}

impl TokenBucket {
    pub fn new(bits_per_second: f64, burst_bytes: usize) -> Self {
        let burst = burst_bytes.max(1) as f64;
        TokenBucket {
            rate: bits_per_second / 8.0,
            burst,
            tokens: burst,
            last: Instant::now(),
        }
    }

    pub fn burst(&self) -> usize {
        self.burst as usize
    }

    fn refill(&mut self) {
        let now = Instant::now();
        self.tokens = (self.tokens + now.duration_since(self.last).as_secs_f64() * self.rate).min(self.burst);
        self.last = now;
    }

    /// Blocks until `n <= burst` bytes may pass.
    pub fn take(&mut self, n: usize) {
        let n = (n as f64).min(self.burst);
        self.refill();
        if self.tokens < n {
            let wait = (n - self.tokens) / self.rate;
            thread::sleep(Duration::from_secs_f64(wait));
            self.refill();
        }
        self.tokens -= n;
    }
}

/// A writer whose output is paced by a token bucket.
pub struct Throttled<W> {
    inner: W,
    bucket: Option<TokenBucket>,
}

impl<W: Write> Throttled<W> {
    /// `None` leaves the writer unpaced.
    pub fn new(inner: W, bits_per_second: Option<f64>) -> Self {
        let bucket = bits_per_second.map(|bps| TokenBucket::new(bps, 4096));
        Throttled { inner, bucket }
    }
}

impl<W: Write> Write for Throttled<W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        match &mut self.bucket {
            None => self.inner.write(buf),
            Some(b) => {
                let chunk = buf.len().min(b.burst());
                b.take(chunk);
                self.inner.write_all(&buf[..chunk])?;
                Ok(chunk)
            }
        }
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}
