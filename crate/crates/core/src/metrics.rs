//! Objective quality metrics (SDR, SI-SDR, STOI), the mel reconstruction
//! loss, the composite generator loss, and per-utterance reports.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::MelConfig;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::signal::{self, AudioBuffer, FrameConfig};

/// Values at or above this many dB (including +inf) are reported as this cap.
pub const DB_CAP: f64 = 100.0;

/// Feature-matching weight in the generator loss.
pub const ALPHA_FM: f64 = 2.0;
/// Mel reconstruction weight in the generator loss.
pub const ALPHA_MEL: f64 = 45.0;

/// A dB value, with `capped` set when the true value was >= [`DB_CAP`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub value: f64,
    pub capped: bool,
}

impl MetricValue {
    fn db(v: f64) -> Self {
        if v >= DB_CAP {
            Self { value: DB_CAP, capped: true }
        } else {
            Self { value: v, capped: false }
        }
    }
}

fn check_pair<T: Scalar>(x: &AudioBuffer<T>, y: &AudioBuffer<T>) -> Result<()> {
    if x.sample_rate() != y.sample_rate() {
        return Err(Error::SampleRate { expected: x.sample_rate(), actual: y.sample_rate() });
    }
    if x.len() != y.len() {
        return Err(Error::shape("metric", format!("reference has {} samples, estimate {}", x.len(), y.len())));
    }
    if x.is_empty() {
        return Err(Error::Empty("metric input"));
    }
    Ok(())
}

fn energy(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|a| a * a).sum()
}

/// `20 log10(||x|| / ||x - x_hat||)`.
pub fn sdr<T: Scalar>(reference: &AudioBuffer<T>, estimate: &AudioBuffer<T>) -> Result<MetricValue> {
    check_pair(reference, estimate)?;
    let x = reference.samples();
    let e = estimate.samples();
    let signal = energy(x.iter().map(|v| v.to_acc()));
    if signal == 0.0 {
        return Err(Error::ZeroReference);
    }
    let noise = energy(x.iter().zip(e).map(|(a, b)| a.to_acc() - b.to_acc()));
    Ok(MetricValue::db(10.0 * (signal / noise).log10()))
}

/// Scale-invariant SDR on zero-mean signals: the estimate is projected onto
/// the reference and the projection is compared with the residual.
pub fn si_sdr<T: Scalar>(reference: &AudioBuffer<T>, estimate: &AudioBuffer<T>) -> Result<MetricValue> {
    check_pair(reference, estimate)?;
    let n = reference.len() as f64;
    let mx = reference.samples().iter().map(|v| v.to_acc()).sum::<f64>() / n;
    let me = estimate.samples().iter().map(|v| v.to_acc()).sum::<f64>() / n;
    let x: Vec<f64> = reference.samples().iter().map(|v| v.to_acc() - mx).collect();
    let e: Vec<f64> = estimate.samples().iter().map(|v| v.to_acc() - me).collect();
    let xx = energy(x.iter().copied());
    if xx == 0.0 {
        return Err(Error::ZeroReference);
    }
    let alpha = x.iter().zip(&e).map(|(a, b)| a * b).sum::<f64>() / xx;
    let target = alpha * alpha * xx;
    let residual = energy(x.iter().zip(&e).map(|(a, b)| b - alpha * a));
    Ok(MetricValue::db(10.0 * (target / residual).log10()))
}

/// Mean absolute difference of the log-mel spectrograms of both signals.
pub fn mel_l1_loss<T: Scalar>(
    reference: &AudioBuffer<T>,
    estimate: &AudioBuffer<T>,
    frame: &FrameConfig,
    mel: &MelConfig,
) -> Result<f64> {
    check_pair(reference, estimate)?;
    let bank = signal::mel_filterbank::<T>(frame.bins(), mel.n_mels, reference.sample_rate(), mel.f_min, mel.f_max)?;
    let a = signal::mel_spectrogram(&signal::stft(reference, frame)?, &bank)?;
    let b = signal::mel_spectrogram(&signal::stft(estimate, frame)?, &bank)?;
    let sum: f64 = a.data().iter().zip(b.data()).map(|(p, q)| (p.to_acc() - q.to_acc()).abs()).sum();
    Ok(sum / a.len() as f64)
}

/// `L_gan + 2 L_fm + 45 L_mel`.
pub fn composite_generator_loss(l_gan: f64, l_fm: f64, l_mel: f64) -> f64 {
    l_gan + ALPHA_FM * l_fm + ALPHA_MEL * l_mel
}

pub mod stoi {
    //! Short-time objective intelligibility.
    //!
    //! Signals are resampled to 10 kHz, frames more than 40 dB below the
    //! loudest reference frame are dropped, 15 one-third octave band envelopes
    //! from 150 Hz are taken from a 512-point STFT, and clipped, normalized
    //! envelope correlations over 30-frame (384 ms) segments are averaged.

    use rustfft::num_complex::Complex;
    use rustfft::FftPlanner;

    use crate::error::{Error, Result};

    pub const FS: u32 = 10_000;
    pub const FRAME: usize = 256;
    pub const NFFT: usize = 512;
    pub const BANDS: usize = 15;
    pub const MIN_FREQ: f64 = 150.0;
    pub const SEGMENT: usize = 30;
    pub const BETA_DB: f64 = -15.0;
    pub const DYN_RANGE_DB: f64 = 40.0;
    const EPS: f64 = f64::EPSILON;

    fn gcd(a: u64, b: u64) -> u64 {
        if b == 0 { a } else { gcd(b, a % b) }
    }

    fn bessel_i0(x: f64) -> f64 {
        let mut sum = 1.0;
        let mut term = 1.0;
        let q = x * x / 4.0;
        for k in 1..200 {
            term *= q / (k * k) as f64;
            sum += term;
            if term < sum * 1e-17 {
                break;
            }
        }
        sum
    }

    /// Rational resampling by `to / from` with a Kaiser-windowed sinc low-pass
    /// (60 dB stopband, transition a tenth of the cutoff), unity passband gain.
    pub fn resample(x: &[f64], from: u32, to: u32) -> Vec<f64> {
        if from == to {
            return x.to_vec();
        }
        let g = gcd(from as u64, to as u64);
        let (up, down) = ((to as u64 / g) as usize, (from as u64 / g) as usize);
        let cutoff = 1.0 / (2.0 * up.max(down) as f64);
        let roll_off = cutoff / 10.0;
        let rejection_db = 60.0;
        let half = ((rejection_db - 8.0) / (28.714 * roll_off)).ceil() as isize;
        let beta = 0.1102 * (rejection_db - 8.7);
        let i0b = bessel_i0(beta);
        let taps: Vec<f64> = (-half..=half)
            .map(|t| {
                let arg = 2.0 * cutoff * t as f64;
                let sinc = if t == 0 { 1.0 } else { (std::f64::consts::PI * arg).sin() / (std::f64::consts::PI * arg) };
                let r = t as f64 / half as f64;
                let kaiser = bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / i0b;
                up as f64 * 2.0 * cutoff * sinc * kaiser
            })
            .collect();
        let out_len = (x.len() * up).div_ceil(down);
        (0..out_len)
            .map(|n| {
                // upsampled-domain time of this output sample
                let center = (n * down) as isize;
                let lo = (center - half).max(0);
                let first = (lo + up as isize - 1) / up as isize;
                let mut acc = 0.0;
                let mut m = first;
                while (m as usize) < x.len() {
                    let offset = center - m * up as isize;
                    if offset < -half {
                        break;
                    }
                    acc += x[m as usize] * taps[(offset + half) as usize];
                    m += 1;
                }
                acc
            })
            .collect()
    }

    /// `np.hanning(n + 2)[1:-1]`.
    fn hanning(n: usize) -> Vec<f64> {
        (1..=n).map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (n + 1) as f64).cos()).collect()
    }

    fn frame_starts(len: usize, frame: usize, hop: usize) -> impl Iterator<Item = usize> {
        (0..len.saturating_sub(frame)).step_by(hop)
    }

    /// Drops frames of `x` quieter than its loudest frame by more than
    /// `range_db` (and the same frames of `y`), then overlap-adds the rest.
    pub fn remove_silent_frames(x: &[f64], y: &[f64], range_db: f64, frame: usize, hop: usize) -> (Vec<f64>, Vec<f64>) {
        let w = hanning(frame);
        let starts: Vec<usize> = frame_starts(x.len(), frame, hop).collect();
        let energies: Vec<f64> = starts
            .iter()
            .map(|&s| 20.0 * ((0..frame).map(|i| (w[i] * x[s + i]).powi(2)).sum::<f64>().sqrt() + EPS).log10())
            .collect();
        let max = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let kept: Vec<usize> = starts.iter().zip(&energies).filter(|(_, &e)| max - range_db - e < 0.0).map(|(&s, _)| s).collect();
        let out_len = if kept.is_empty() { 0 } else { (kept.len() - 1) * hop + frame };
        let mut xs = vec![0.0; out_len];
        let mut ys = vec![0.0; out_len];
        for (k, &s) in kept.iter().enumerate() {
            for i in 0..frame {
                xs[k * hop + i] += w[i] * x[s + i];
                ys[k * hop + i] += w[i] * y[s + i];
            }
        }
        (xs, ys)
    }

    /// One-third octave band matrix `[BANDS, NFFT / 2 + 1]` of 0/1 weights.
    pub fn third_octave_bands() -> Vec<Vec<f64>> {
        let bins = NFFT / 2 + 1;
        let f: Vec<f64> = (0..bins).map(|i| i as f64 * FS as f64 / NFFT as f64).collect();
        let nearest = |target: f64| {
            (0..bins)
                .min_by(|&a, &b| (f[a] - target).powi(2).partial_cmp(&(f[b] - target).powi(2)).unwrap())
                .unwrap()
        };
        (0..BANDS)
            .map(|k| {
                let k = k as f64;
                let lo = nearest(MIN_FREQ * 2f64.powf((2.0 * k - 1.0) / 6.0));
                let hi = nearest(MIN_FREQ * 2f64.powf((2.0 * k + 1.0) / 6.0));
                (0..bins).map(|i| if i >= lo && i < hi { 1.0 } else { 0.0 }).collect()
            })
            .collect()
    }

    /// Band envelopes `[BANDS][frames]`.
    fn band_envelopes(x: &[f64], obm: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let w = hanning(FRAME);
        let fft = FftPlanner::<f64>::new().plan_fft_forward(NFFT);
        let bins = NFFT / 2 + 1;
        let mut power: Vec<Vec<f64>> = Vec::new();
        for s in frame_starts(x.len(), FRAME, FRAME / 2) {
            let mut buf = vec![Complex::new(0.0, 0.0); NFFT];
            for i in 0..FRAME {
                buf[i].re = w[i] * x[s + i];
            }
            fft.process(&mut buf);
            power.push(buf[..bins].iter().map(|c| c.norm_sqr()).collect());
        }
        obm.iter()
            .map(|band| power.iter().map(|p| band.iter().zip(p).map(|(a, b)| a * b).sum::<f64>().sqrt()).collect())
            .collect()
    }

    fn center_and_normalize(v: &mut [f64]) {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        v.iter_mut().for_each(|a| *a -= mean);
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt() + EPS;
        v.iter_mut().for_each(|a| *a /= norm);
    }

    /// STOI of signals already at 10 kHz.
    pub fn stoi_10k(x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != y.len() {
            return Err(Error::shape("stoi", format!("{} vs {} samples", x.len(), y.len())));
        }
        let (xs, ys) = remove_silent_frames(x, y, DYN_RANGE_DB, FRAME, FRAME / 2);
        let obm = third_octave_bands();
        let xb = band_envelopes(&xs, &obm);
        let yb = band_envelopes(&ys, &obm);
        let frames = xb[0].len();
        if frames < SEGMENT {
            return Err(Error::TooShort(format!(
                "{frames} non-silent frames, STOI needs at least {SEGMENT} (384 ms)"
            )));
        }
        let clip = 10f64.powf(-BETA_DB / 20.0);
        let mut total = 0.0;
        let segments = frames - SEGMENT + 1;
        for m in SEGMENT..=frames {
            for (xband, yband) in xb.iter().zip(&yb) {
                let xseg = &xband[m - SEGMENT..m];
                let yseg = &yband[m - SEGMENT..m];
                let xn = xseg.iter().map(|a| a * a).sum::<f64>().sqrt();
                let yn = yseg.iter().map(|a| a * a).sum::<f64>().sqrt();
                let k = xn / (yn + EPS);
                let mut yp: Vec<f64> = yseg.iter().zip(xseg).map(|(&b, &a)| (b * k).min(a * (1.0 + clip))).collect();
                let mut xc = xseg.to_vec();
                center_and_normalize(&mut yp);
                center_and_normalize(&mut xc);
                total += yp.iter().zip(&xc).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        Ok(total / (segments * BANDS) as f64)
    }
}

/// STOI of an estimate against a clean reference (any input rate).
pub fn stoi<T: Scalar>(reference: &AudioBuffer<T>, estimate: &AudioBuffer<T>) -> Result<f64> {
    check_pair(reference, estimate)?;
    if reference.duration_secs() < 0.5 {
        return Err(Error::TooShort(format!("STOI needs >= 0.5 s, got {:.3} s", reference.duration_secs())));
    }
    let rate = reference.sample_rate();
    let x: Vec<f64> = reference.samples().iter().map(|v| v.to_acc()).collect();
    let y: Vec<f64> = estimate.samples().iter().map(|v| v.to_acc()).collect();
    stoi::stoi_10k(&stoi::resample(&x, rate, stoi::FS), &stoi::resample(&y, rate, stoi::FS))
}

/// Metric values for one utterance, keyed by metric name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceMetrics {
    #[serde(rename = "utterance_id")]
    pub id: String,
    #[serde(flatten)]
    pub values: BTreeMap<String, f64>,
    /// Metrics whose value was capped at [`DB_CAP`].
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub capped: Vec<String>,
}

impl UtteranceMetrics {
    pub fn new(id: impl Into<String>) -> Self {
        Self { id: id.into(), values: BTreeMap::new(), capped: Vec::new() }
    }

    pub fn set(&mut self, name: &str, value: f64) {
        self.values.insert(name.to_string(), value);
    }

    pub fn set_db(&mut self, name: &str, value: MetricValue) {
        self.set(name, value.value);
        if value.capped {
            self.capped.push(name.to_string());
        }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.get(name).copied()
    }
}

/// SDR, SI-SDR and (for inputs of at least 0.5 s) STOI of `estimate` vs `clean`.
pub fn evaluate<T: Scalar>(id: &str, clean: &AudioBuffer<T>, estimate: &AudioBuffer<T>) -> Result<UtteranceMetrics> {
    let mut m = UtteranceMetrics::new(id);
    m.set_db("sdr", sdr(clean, estimate)?);
    m.set_db("si_sdr", si_sdr(clean, estimate)?);
    match stoi(clean, estimate) {
        Ok(v) => m.set("stoi", v),
        Err(Error::TooShort(_)) => {}
        Err(e) => return Err(e),
    }
    Ok(m)
}

/// Per-utterance metrics with arithmetic-mean aggregates.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsReport {
    pub utterances: Vec<UtteranceMetrics>,
}

impl MetricsReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, m: UtteranceMetrics) {
        self.utterances.push(m);
    }

    pub fn count(&self) -> usize {
        self.utterances.len()
    }

    /// Mean of each metric over the utterances that report it.
    pub fn aggregate(&self) -> BTreeMap<String, f64> {
        let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
        for u in &self.utterances {
            for (k, &v) in &u.values {
                let e = sums.entry(k.clone()).or_insert((0.0, 0));
                e.0 += v;
                e.1 += 1;
            }
        }
        sums.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
    }

    pub fn mean(&self, metric: &str) -> Option<f64> {
        self.aggregate().get(metric).copied()
    }

    pub fn sort_by_id(&mut self) {
        self.utterances.sort_by(|a, b| a.id.cmp(&b.id));
    }
}
