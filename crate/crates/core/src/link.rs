//! End-to-end chain: PDU -> spread -> QPSK -> OFDM -> channel -> demod ->
//! estimate -> equalize -> despread -> parse, plus loopback and sweep runs.

use num_complex::Complex64;
use std::fs;
use std::path::{Path, PathBuf};

use crate::capture::IqCapture;
use crate::chanest::{self, ChannelEstimate, EqualizedStream, EstimatorMethod};
use crate::channel::{self, ChannelResponse, FadingTrajectory};
use crate::config::{FadingMode, RunConfig};
use crate::dsp::{psd_estimate, PsdConfig, RandomSource, SampleBuffer};
use crate::error::{Error, Result};
use crate::mac::{self, MacPdu};
use crate::metrics::{ber_count, evm_rms, ser_count, LinkReport};
use crate::ofdm::{self, DemodOutput};
use crate::par;
use crate::spreading::{despread, spread_with_rate, ChipFrame, PnGenerator};

/// Everything the transmitter produced, kept as receiver-side metadata
/// (timing and framing are ideal by construction).
#[derive(Debug, Clone)]
pub struct TxChain {
    pub pdus: Vec<MacPdu>,
    /// Serialized PDU bits, the stream BER is measured on.
    pub bits: Vec<u8>,
    pub frames: Vec<ChipFrame>,
    /// QPSK data symbols before zero padding.
    pub data_symbols: Vec<Complex64>,
    /// Packed frequency grids, one per OFDM symbol (the reference c).
    pub grids: Vec<Vec<Complex64>>,
    pub buffer: SampleBuffer,
}

impl TxChain {
    pub fn n_symbols(&self) -> usize {
        self.grids.len()
    }
}

/// Build the transmit stream for the configured bit budget.
pub fn transmit(cfg: &RunConfig, rng: &mut RandomSource) -> Result<TxChain> {
    let payload_bits_per_pdu = 8 * cfg.mac.payload_bytes;
    let source: Option<Vec<u8>> = match &cfg.mac.payload_file {
        Some(path) => Some(fs::read(path)?),
        None => None,
    };
    let n_pdus = match &source {
        Some(bytes) => bytes.len().div_ceil(cfg.mac.payload_bytes).max(1),
        None => cfg.run.bits.div_ceil(payload_bits_per_pdu).max(1),
    };

    let mut pdus = Vec::with_capacity(n_pdus);
    let mut bits = Vec::new();
    for i in 0..n_pdus {
        let payload = match &source {
            Some(bytes) => {
                let start = (i * cfg.mac.payload_bytes).min(bytes.len());
                let end = ((i + 1) * cfg.mac.payload_bytes).min(bytes.len());
                let mut chunk = bytes[start..end].to_vec();
                chunk.resize(cfg.mac.payload_bytes, 0);
                chunk
            }
            None => rng.bytes(cfg.mac.payload_bytes),
        };
        let pdu = mac::build_pdu(&payload, cfg.mac.cid, cfg.mac.flags)?;
        bits.extend_from_slice(&mac::serialize_pdu(&pdu));
        pdus.push(pdu);
    }

    // Spread into fixed-length chip frames, PN generator streaming across
    // frames.
    let mut gen = PnGenerator::default_scrambler();
    let mut frames = Vec::new();
    let mut chips = Vec::new();
    for block in bits.chunks(cfg.spreading.payload_bits) {
        let frame = spread_with_rate(
            block,
            &mut gen,
            cfg.spreading.frame_len,
            cfg.spreading.chip_rate_hz,
        )?;
        chips.extend_from_slice(&frame.chips);
        frames.push(frame);
    }

    let data_symbols = ofdm::qpsk_map(&chips)?;

    // Pack 192-symbol loads, zero-padding the final partial symbol.
    let n_data = cfg.frame.n_data;
    let n_symbols = data_symbols.len().div_ceil(n_data);
    let grids: Vec<Vec<Complex64>> = (0..n_symbols)
        .map(|k| {
            let start = k * n_data;
            let end = ((k + 1) * n_data).min(data_symbols.len());
            let mut load = data_symbols[start..end].to_vec();
            load.resize(n_data, Complex64::new(0.0, 0.0));
            ofdm::pack_subcarriers(&load, &cfg.frame, k)
        })
        .collect::<Result<_>>()?;

    let buffer = ofdm::modulate_stream(&grids, &cfg.frame)?;
    Ok(TxChain {
        pdus,
        bits,
        frames,
        data_symbols,
        grids,
        buffer,
    })
}

/// Receiver products.
#[derive(Debug, Clone)]
pub struct RxChain {
    pub demod: DemodOutput,
    pub estimate: ChannelEstimate,
    pub equalized: EqualizedStream,
    /// Recovered serialized-PDU bit stream.
    pub bits: Vec<u8>,
    pub pdus_ok: usize,
}

/// Demodulate, estimate, equalize, despread and re-parse.
///
/// `truth` is required for the genie estimator and attached to the demod
/// grid whenever present.
pub fn receive(
    rx_buf: &SampleBuffer,
    tx: &TxChain,
    cfg: &RunConfig,
    truth: Option<&ChannelResponse>,
) -> Result<RxChain> {
    let n_symbols = tx.n_symbols();
    let mut demod = ofdm::ofdm_demodulate(rx_buf, &cfg.frame, n_symbols)?;
    let c_grid = crate::dsp::ComplexGrid::from_rows(tx.grids.clone())?;
    demod = demod.with_reference(c_grid);
    if let Some(resp) = truth {
        demod = demod.with_channel(resp.h.clone());
    }

    let estimate = match cfg.run.estimator {
        EstimatorMethod::Genie => {
            let resp = truth.ok_or_else(|| {
                Error::Geometry("genie estimator needs the ground-truth response".into())
            })?;
            ChannelEstimate::genie(resp)
        }
        method => chanest::estimate_ls(&demod, &cfg.frame, method)?,
    };

    let equalized = chanest::equalize(&demod, &estimate, &cfg.frame)?;

    // Drop the zero-pad tail, slice back into chip frames, despread.
    let decisions = &equalized.symbols[..tx.data_symbols.len()];
    let chips = ofdm::qpsk_demap(decisions);
    let mut gen = PnGenerator::default_scrambler();
    let mut bits = Vec::with_capacity(tx.bits.len());
    let mut offset = 0usize;
    for tx_frame in &tx.frames {
        let frame = ChipFrame {
            chips: chips[offset..offset + cfg.spreading.frame_len].to_vec(),
            chip_rate_hz: tx_frame.chip_rate_hz,
            payload_len: tx_frame.payload_len,
        };
        bits.extend_from_slice(&despread(&frame, &mut gen)?);
        offset += cfg.spreading.frame_len;
    }

    // Walk the PDU stream with transmit-side framing.
    let mut pdus_ok = 0usize;
    let mut at = 0usize;
    for pdu in &tx.pdus {
        let len_bits = 8 * pdu.len_bytes();
        if at + len_bits <= bits.len() && mac::parse_pdu(&bits[at..at + len_bits]).is_ok() {
            pdus_ok += 1;
        }
        at += len_bits;
    }

    Ok(RxChain {
        demod,
        estimate,
        equalized,
        bits,
        pdus_ok,
    })
}

/// One complete simulated link run.
#[derive(Debug, Clone)]
pub struct LoopbackRun {
    pub report: LinkReport,
    pub tx: TxChain,
    pub rx: RxChain,
    pub rx_buffer: SampleBuffer,
    pub truth: ChannelResponse,
}

/// Run the full chain once with the configured channel.
pub fn run_loopback(cfg: &RunConfig) -> Result<LoopbackRun> {
    cfg.validate()?;
    let root = RandomSource::new(cfg.run.seed);
    let mut rng_data = root.derive(1);
    let mut rng_fading = root.derive(2);
    let mut rng_noise = root.derive(3);

    let tx = transmit(cfg, &mut rng_data)?;

    let profile = &cfg.channel.profile;
    let tail = profile.max_delay_samples(cfg.frame.sample_rate);
    let duration = (tx.buffer.len() + tail + 1) as f64 / cfg.frame.sample_rate;
    let trajectory = match cfg.channel.fading {
        FadingMode::Static => FadingTrajectory::static_from_profile(profile),
        FadingMode::Rayleigh => channel::fading_process(profile, duration, &mut rng_fading)?,
    };

    let rx_buffer = channel::channel_apply(&tx.buffer, profile, &trajectory, &mut rng_noise)?;
    let truth = channel::effective_channel(profile, &trajectory, &cfg.frame, tx.n_symbols())?;
    let rx = receive(&rx_buffer, &tx, cfg, Some(&truth))?;

    let ber = ber_count(&tx.bits, &rx.bits)?;
    let ser = ser_count(&tx.bits, &rx.bits, 2)?;
    let evm = evm_rms(
        &rx.equalized.symbols[..tx.data_symbols.len()],
        &tx.data_symbols,
    )?;

    let report = LinkReport {
        seed: cfg.run.seed,
        ebn0_db: cfg.channel.ebn0_db,
        bits_compared: ber.bits_compared,
        bit_errors: ber.bit_errors,
        ber: ber.ber,
        symbol_errors: ser.symbol_errors,
        ser: ser.ser,
        evm_rms_percent: evm,
        pdus_sent: tx.pdus.len(),
        pdus_ok: rx.pdus_ok,
        erasures: rx.equalized.n_erasures(),
        config_echo: cfg.resolved_text(),
    };
    assert!(
        report.ber_ser_consistent(),
        "SER {} inconsistent with BER {} for Gray QPSK",
        report.ser,
        report.ber
    );

    Ok(LoopbackRun {
        report,
        tx,
        rx,
        rx_buffer,
        truth,
    })
}

impl LoopbackRun {
    /// Write the run's artifacts; returns the created paths.
    ///
    /// Emits `report.txt`, `tx.iq`, `rx.iq`, `spectrum.csv` (transmit PSD),
    /// `constellation.csv`, `channel_est.csv` and `channel_truth.csv`.
    pub fn write_artifacts(&self, cfg: &RunConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(out_dir)?;
        let mut paths = Vec::new();
        let mut emit = |name: &str, bytes: Vec<u8>| -> Result<()> {
            let path = out_dir.join(name);
            fs::write(&path, bytes)?;
            paths.push(path);
            Ok(())
        };

        let mut report = Vec::new();
        self.report.write_text(&mut report)?;
        emit("report.txt", report)?;

        let mut tx_iq = Vec::new();
        IqCapture::from_buffer(&self.tx.buffer, cfg.run.center_freq_hz).write(&mut tx_iq)?;
        emit("tx.iq", tx_iq)?;
        let mut rx_iq = Vec::new();
        IqCapture::from_buffer(&self.rx_buffer, cfg.run.center_freq_hz).write(&mut rx_iq)?;
        emit("rx.iq", rx_iq)?;

        let spectrum = transmit_spectrum(&self.tx.buffer)?;
        let mut spec_csv = Vec::new();
        spectrum.write_csv(&mut spec_csv)?;
        emit("spectrum.csv", spec_csv)?;

        let mut constellation = Vec::new();
        self.rx.demod.write_csv(&cfg.frame, &mut constellation)?;
        emit("constellation.csv", constellation)?;

        let mut est_csv = Vec::new();
        self.rx.estimate.write_csv(&mut est_csv)?;
        emit("channel_est.csv", est_csv)?;
        let mut truth_csv = Vec::new();
        self.truth.write_csv(&mut truth_csv)?;
        emit("channel_truth.csv", truth_csv)?;

        Ok(paths)
    }
}

/// Welch PSD of a transmit stream with the default analysis settings.
pub fn transmit_spectrum(buffer: &SampleBuffer) -> Result<crate::dsp::SpectrumEstimate> {
    psd_estimate(buffer, &PsdConfig::default())
}

/// One row of a BER-vs-SNR sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub ebn0_db: f64,
    pub ber: f64,
    pub ser: f64,
    pub evm_rms_percent: f64,
    pub bit_errors: usize,
    pub bits_compared: usize,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("ebn0_db,ber,ser,evm_rms_percent,bit_errors,bits_compared\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{:e},{:e},{},{},{}\n",
                row.ebn0_db,
                row.ber,
                row.ser,
                row.evm_rms_percent,
                row.bit_errors,
                row.bits_compared
            ));
        }
        out
    }
}

/// Payload bits simulated per sweep batch. Large points split into batches
/// so buffers stay bounded and batches spread across the thread pool; the
/// batch size is part of the deterministic run definition.
pub const SWEEP_BATCH_BITS: usize = 1_000_000;

/// Run one loopback per Eb/N0 point, splitting large bit budgets into
/// independently seeded batches. Batches execute in parallel; rows come back
/// in list order and are identical for any thread count.
pub fn run_sweep(cfg: &RunConfig) -> Result<SweepResult> {
    cfg.validate()?;
    if cfg.run.snr_list_db.is_empty() {
        return Err(Error::Config {
            line: 0,
            msg: "sweep needs a nonempty snr_list_db".into(),
        });
    }
    let points = cfg.run.snr_list_db.clone();
    let n_batches = cfg.run.bits.div_ceil(SWEEP_BATCH_BITS).max(1);

    // One flat task list over (point, batch) for load balance.
    let mut tasks = Vec::new();
    for (i, &ebn0) in points.iter().enumerate() {
        let point_rng = RandomSource::new(cfg.run.seed).derive(100 + i as u64);
        let mut remaining = cfg.run.bits;
        for j in 0..n_batches {
            let batch_bits = remaining.min(SWEEP_BATCH_BITS);
            remaining -= batch_bits;
            let mut batch_cfg = cfg.with_ebn0(ebn0);
            batch_cfg.run.bits = batch_bits.max(1);
            batch_cfg.run.seed = point_rng.derive(j as u64).seed();
            tasks.push((i, batch_cfg));
        }
    }

    let results = par::map_items(tasks, |(i, batch_cfg)| {
        run_loopback(&batch_cfg).map(|run| (i, run.report))
    });

    let mut rows: Vec<SweepRow> = points
        .iter()
        .map(|&ebn0| SweepRow {
            ebn0_db: ebn0,
            ber: 0.0,
            ser: 0.0,
            evm_rms_percent: 0.0,
            bit_errors: 0,
            bits_compared: 0,
        })
        .collect();
    // Merge batch counts; EVM merges as a bit-weighted RMS.
    let mut symbol_errors = vec![0usize; points.len()];
    let mut evm_sq_weighted = vec![0.0f64; points.len()];
    for result in results {
        let (i, report) = result?;
        rows[i].bit_errors += report.bit_errors;
        rows[i].bits_compared += report.bits_compared;
        symbol_errors[i] += report.symbol_errors;
        evm_sq_weighted[i] +=
            report.evm_rms_percent * report.evm_rms_percent * report.bits_compared as f64;
    }
    for (i, row) in rows.iter_mut().enumerate() {
        let bits = row.bits_compared.max(1) as f64;
        row.ber = row.bit_errors as f64 / bits;
        row.ser = symbol_errors[i] as f64 / (bits / 2.0);
        row.evm_rms_percent = (evm_sq_weighted[i] / bits).sqrt();
    }
    Ok(SweepResult { rows })
}
