//! Wires the engine, both path directions and the flow endpoints into one
//! run, sampling metrics on a fixed clock.

use std::collections::HashMap;

use crate::cca::CcaKind;
use crate::engine::Engine;
use crate::error::Error;
use crate::metrics::{FlowProbe, MetricSample};
use crate::netpath::{DirectionalPath, PathEvent};
use crate::packet::{FlowId, Packet, MSS};
use crate::rng::RngRegistry;
use crate::scenario::{Direction, ScenarioConfig};
use crate::time::SimTime;
use crate::transport::{Outbox, Receiver, Sender, SenderTimer};

pub const INITIAL_CWND_SEGMENTS: u64 = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum PathId {
    Data,
    Ack,
}

#[derive(Debug)]
enum SimEvent {
    Path(PathId, PathEvent),
    Timer(usize, SenderTimer),
    Start(usize),
}

struct Flow {
    flow_id: FlowId,
    start: SimTime,
    sender: Sender,
    receiver: Receiver,
    probe: Option<FlowProbe>,
}

pub struct Simulation {
    cfg: ScenarioConfig,
    engine: Engine<SimEvent>,
    /// Carries data segments: the uplink for uploads, the downlink for
    /// downloads.
    data_path: DirectionalPath,
    ack_path: DirectionalPath,
    flows: Vec<Flow>,
    index: HashMap<FlowId, usize>,
    outbox: Outbox,
    period_ns: u64,
    sample_count: u64,
    next_sample: u64,
}

impl Simulation {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self, Error> {
        cfg.validate()?;
        let mut rngs = RngRegistry::new(cfg.seed);
        let (data_label, ack_label) = match cfg.direction {
            Direction::Upload => ("netpath/up", "netpath/down"),
            Direction::Download => ("netpath/down", "netpath/up"),
        };
        let data_path = DirectionalPath::new(cfg.link.clone(), &cfg.qdisc, rngs.take(data_label));
        let ack_path = DirectionalPath::new(cfg.link.clone(), &cfg.qdisc, rngs.take(ack_label));
        let mut engine = Engine::new();
        let mut flows = Vec::with_capacity(cfg.flows.len());
        let mut index = HashMap::new();
        for (i, f) in cfg.flows.iter().enumerate() {
            let rng = rngs.take(&format!("cca/{}", f.flow_id));
            let cca = f.cca.build(u64::from(MSS), INITIAL_CWND_SEGMENTS, rng);
            let start = SimTime::from_secs_f64(f.start_offset_s);
            flows.push(Flow {
                flow_id: f.flow_id,
                start,
                sender: Sender::new(f.flow_id, u64::from(MSS), cca),
                receiver: Receiver::new(f.flow_id),
                probe: None,
            });
            index.insert(f.flow_id, i);
            engine.schedule(start, SimEvent::Start(i));
        }
        Ok(Simulation {
            period_ns: cfg.sampling_period().as_nanos() as u64,
            sample_count: cfg.sample_count(),
            next_sample: 1,
            cfg: cfg.clone(),
            engine,
            data_path,
            ack_path,
            flows,
            index,
            outbox: Outbox::default(),
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn now(&self) -> SimTime {
        self.engine.now()
    }

    pub fn events_processed(&self) -> u64 {
        self.engine.events_processed()
    }

    pub fn is_finished(&self) -> bool {
        self.next_sample > self.sample_count
    }

    pub fn data_path(&self) -> &DirectionalPath {
        &self.data_path
    }

    pub fn ack_path(&self) -> &DirectionalPath {
        &self.ack_path
    }

    pub fn sender(&self, flow_id: FlowId) -> Option<&Sender> {
        self.index.get(&flow_id).map(|&i| &self.flows[i].sender)
    }

    pub fn sender_mut(&mut self, flow_id: FlowId) -> Option<&mut Sender> {
        self.index.get(&flow_id).map(|&i| &mut self.flows[i].sender)
    }

    pub fn flow_ccas(&self) -> Vec<(FlowId, CcaKind)> {
        self.flows.iter().map(|f| (f.flow_id, f.sender.cca().kind())).collect()
    }

    /// Runs to the next sampling instant and returns one sample per started
    /// flow, or `None` once the run is over.
    pub fn next_samples(&mut self) -> Result<Option<Vec<MetricSample>>, Error> {
        if self.is_finished() {
            return Ok(None);
        }
        let t = SimTime::from_nanos(self.next_sample * self.period_ns);
        self.advance_to(t)?;
        self.next_sample += 1;
        let backlog = self.data_path.backlog() as u64;
        let samples = self
            .flows
            .iter_mut()
            .filter_map(|f| {
                let probe = f.probe.as_mut()?;
                Some(probe.sample(&mut f.sender, t, backlog))
            })
            .collect();
        Ok(Some(samples))
    }

    /// Runs the whole scenario, handing every sample to `sink` in order.
    pub fn run(&mut self, mut sink: impl FnMut(&MetricSample)) -> Result<(), Error> {
        while let Some(batch) = self.next_samples()? {
            for s in &batch {
                sink(s);
            }
        }
        Ok(())
    }

    /// Processes every event up to and including `t`.
    pub fn advance_to(&mut self, t: SimTime) -> Result<(), Error> {
        while let Some(ev) = self.engine.pop_until(t) {
            self.dispatch(ev.fire_at, ev.payload)?;
        }
        self.engine.advance_to(t);
        Ok(())
    }

    fn dispatch(&mut self, now: SimTime, ev: SimEvent) -> Result<(), Error> {
        match ev {
            SimEvent::Path(id, PathEvent::Deliver(pkt)) => self.deliver(id, pkt, now)?,
            SimEvent::Path(id, pev) => {
                let engine = &mut self.engine;
                let path = match id {
                    PathId::Data => &mut self.data_path,
                    PathId::Ack => &mut self.ack_path,
                };
                let mut sched = |at, e| {
                    engine.schedule(at, SimEvent::Path(id, e));
                };
                match pev {
                    PathEvent::TransmitComplete => path.on_transmit_complete(now, &mut sched),
                    PathEvent::Wake => path.on_wake(now, &mut sched),
                    PathEvent::Deliver(_) => unreachable!(),
                }
            }
            SimEvent::Timer(i, timer) => {
                self.flows[i].sender.on_timer(timer, now, &mut self.outbox);
                self.flush(i, now);
            }
            SimEvent::Start(i) => {
                let f = &mut self.flows[i];
                f.probe = Some(FlowProbe::new(f.start, self.cfg.goodput_window()));
                f.sender.start(now, &mut self.outbox);
                self.flush(i, now);
            }
        }
        Ok(())
    }

    fn deliver(&mut self, id: PathId, pkt: Packet, now: SimTime) -> Result<(), Error> {
        let i = *self
            .index
            .get(&pkt.flow_id)
            .ok_or(Error::UnknownFlow(pkt.flow_id))?;
        match id {
            PathId::Data => {
                debug_assert!(!pkt.is_ack);
                let ack = self.flows[i].receiver.on_data(&pkt, now);
                self.send(PathId::Ack, ack, now);
            }
            PathId::Ack => {
                debug_assert!(pkt.is_ack);
                self.flows[i].sender.on_ack(&pkt, now, &mut self.outbox)?;
                self.flush(i, now);
            }
        }
        Ok(())
    }

    fn send(&mut self, id: PathId, pkt: Packet, now: SimTime) {
        let engine = &mut self.engine;
        let path = match id {
            PathId::Data => &mut self.data_path,
            PathId::Ack => &mut self.ack_path,
        };
        path.send(pkt, now, &mut |at, e| {
            engine.schedule(at, SimEvent::Path(id, e));
        });
    }

    fn flush(&mut self, flow: usize, now: SimTime) {
        let mut out = std::mem::take(&mut self.outbox);
        for (at, timer) in out.timers.drain(..) {
            self.engine.schedule(at, SimEvent::Timer(flow, timer));
        }
        for pkt in out.packets.drain(..) {
            self.send(PathId::Data, pkt, now);
        }
        self.outbox = out;
    }
}
