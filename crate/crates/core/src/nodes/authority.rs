use std::collections::{BTreeMap, BTreeSet};

use super::ledger::{ActionCost, Census, ScalingAction, ScalingLedger};
use super::{NodeEntry, NodeError, NodeRole, PublicIndex, AUTHORIZATION_ATTRIBUTE_PREFIX};
use crate::abe::{Abe, AbeMasterKey, AbePrivateKey, AbePublicParams, AbeSystemConfig, AttributeId, AttributeRole, SecureRng};
use crate::client::ConsumerCredentials;
use crate::mst::{ProtocolParams, SERVICE_NODE_ATTRIBUTE};
use crate::policy::AttributeSet;
use crate::suite::{CryptoSuite, SigKeyPair};
use crate::wire::{Reader, WireError, Writer};

const AUTHORITY_VERSION: u8 = 1;
const DESCRIPTOR_VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InitConfig {
    pub security_bits: u16,
    /// Generic attributes a_i.
    pub generic: Vec<String>,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self {
            security_bits: 128,
            generic: Vec::new(),
        }
    }
}

/// What the authority remembers about an enrolled consumer, so that keys
/// can be re-issued after a revocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsumerRecord {
    pub attributes: AttributeSet,
    pub validity: AttributeSet,
    pub removed: bool,
}

/// Keys and registry facts handed to a newly provisioned node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeDescriptor {
    pub id: String,
    pub role: NodeRole,
    pub address: String,
    pub abe_key: AbePrivateKey,
    /// M_public/M_private for authorization nodes.
    pub signing: Option<SigKeyPair>,
    /// A_j for authorization nodes.
    pub responsibility: AttributeSet,
}

impl NodeDescriptor {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_version(DESCRIPTOR_VERSION);
        w.str(&self.id)
            .str(self.role.as_str())
            .str(&self.address)
            .bytes(&self.abe_key.to_bytes());
        match &self.signing {
            Some(k) => w.u8(1).bytes(&k.to_bytes()),
            None => w.u8(0),
        };
        w.strings(self.responsibility.iter());
        w.finish()
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::versioned(buf, DESCRIPTOR_VERSION)?;
        let id = r.str()?.to_owned();
        let role = r.str()?.parse().map_err(|e: NodeError| WireError::Invalid(e.to_string()))?;
        let address = r.str()?.to_owned();
        let abe_key = AbePrivateKey::from_bytes(r.bytes()?)?;
        let signing = match r.u8()? {
            0 => None,
            1 => Some(SigKeyPair::from_bytes(r.bytes()?)?),
            t => return Err(WireError::Invalid(format!("signing tag {t}"))),
        };
        let responsibility = r.strings()?.into_iter().collect();
        r.finish()?;
        Ok(Self {
            id,
            role,
            address,
            abe_key,
            signing,
            responsibility,
        })
    }
}

/// Fresh keys produced by a revocation.
#[derive(Debug, Clone, Default)]
pub struct Rekey {
    pub revoked: Vec<String>,
    pub consumers: BTreeMap<String, AbePrivateKey>,
    pub service_nodes: BTreeMap<String, AbePrivateKey>,
}

/// Owner of the attribute universe and the master key.
///
/// The engine is single-authority. `cohort` is the number of authorities
/// ‖A‖ the deployment models: every key delivery is accounted as one
/// message and one keying operation per authority, the cost a
/// multi-authority scheme would pay.
#[derive(Debug, Clone)]
pub struct Authority {
    abe: Abe,
    suite: CryptoSuite,
    pk: AbePublicParams,
    mk: AbeMasterKey,
    params: ProtocolParams,
    cohort: u64,
    consumers: BTreeMap<String, ConsumerRecord>,
    ledger: ScalingLedger,
}

impl Authority {
    /// System initialization: universe of SN, the generic attributes and
    /// v_1..v_x, published to a fresh index.
    pub fn system_init(
        abe: Abe,
        suite: CryptoSuite,
        cfg: &InitConfig,
        params: ProtocolParams,
        rng: &mut dyn SecureRng,
    ) -> Result<(Self, PublicIndex), NodeError> {
        params.validate().map_err(NodeError::Invalid)?;
        let mut universe = vec![AttributeId::new(SERVICE_NODE_ATTRIBUTE, AttributeRole::ServiceNode)];
        for g in &cfg.generic {
            if g == SERVICE_NODE_ATTRIBUTE || g.starts_with(AUTHORIZATION_ATTRIBUTE_PREFIX) || is_validity_name(g) {
                return Err(NodeError::Invalid(format!("generic attribute {g:?} collides with a reserved name")));
            }
            universe.push(AttributeId::new(g.clone(), AttributeRole::Generic));
        }
        universe.extend(
            params
                .validity_names()
                .into_iter()
                .map(|v| AttributeId::new(v, AttributeRole::Validity)),
        );
        let (pk, mk) = abe.setup(
            &AbeSystemConfig {
                security_bits: cfg.security_bits,
                universe,
            },
            rng,
        )?;
        let index = PublicIndex::new(suite.id, params, pk.clone());
        let authority = Self {
            abe,
            suite,
            pk,
            mk,
            params,
            cohort: 1,
            consumers: BTreeMap::new(),
            ledger: ScalingLedger::new(),
        };
        Ok((authority, index))
    }

    pub fn pk(&self) -> &AbePublicParams {
        &self.pk
    }

    pub fn params(&self) -> &ProtocolParams {
        &self.params
    }

    pub fn suite(&self) -> &CryptoSuite {
        &self.suite
    }

    pub fn cohort(&self) -> u64 {
        self.cohort
    }

    pub fn ledger(&self) -> &ScalingLedger {
        &self.ledger
    }

    pub fn consumers(&self) -> &BTreeMap<String, ConsumerRecord> {
        &self.consumers
    }

    pub fn census(&self, index: &PublicIndex) -> Census {
        Census {
            authorities: self.cohort,
            authorization_nodes: index.live(NodeRole::Authorization).count() as u64,
            service_nodes: index.live(NodeRole::Service).count() as u64,
            consumers: self.consumers.values().filter(|c| !c.removed).count() as u64,
        }
    }

    pub fn begin(&mut self, action: ScalingAction, index: &PublicIndex) {
        let census = self.census(index);
        self.ledger.begin(action, census);
    }

    pub fn end(&mut self, index: &PublicIndex) -> Option<ActionCost> {
        let census = self.census(index);
        self.ledger.end(census)
    }

    pub fn abandon(&mut self) {
        self.ledger.abandon();
    }

    /// Runs `f` as one accounted scaling action.
    fn action<T>(
        &mut self,
        action: ScalingAction,
        index: &mut PublicIndex,
        f: impl FnOnce(&mut Self, &mut PublicIndex) -> Result<T, NodeError>,
    ) -> Result<T, NodeError> {
        self.begin(action, index);
        match f(self, index) {
            Ok(v) => {
                self.end(index);
                Ok(v)
            }
            Err(e) => {
                self.abandon();
                Err(e)
            }
        }
    }

    /// One key delivered to one component by every authority.
    fn deliver_key(&mut self) {
        self.ledger.key_messages(self.cohort);
        self.ledger.keying_ops(self.cohort);
    }

    fn publish(&mut self, index: &mut PublicIndex) -> Result<(), NodeError> {
        self.ledger.messages(1);
        index.publish_params(&self.pk)
    }

    pub fn add_authority(&mut self, index: &mut PublicIndex) -> Result<(), NodeError> {
        self.action(ScalingAction::AddAuthority, index, |a, ix| {
            // Inform the active authorities, publish, key the newcomer.
            a.ledger.messages(a.cohort + 1);
            a.ledger.keying_ops(1);
            a.cohort += 1;
            ix.publish_params(&a.pk)
        })
    }

    pub fn remove_authority(&mut self, index: &mut PublicIndex) -> Result<(), NodeError> {
        if self.cohort <= 1 {
            return Err(NodeError::Invalid("the last authority cannot be removed".into()));
        }
        self.action(ScalingAction::RemoveAuthority, index, |a, ix| {
            a.cohort -= 1;
            a.ledger.messages(a.cohort + 1);
            ix.publish_params(&a.pk)
        })
    }

    pub fn provision_authorization_node(
        &mut self,
        index: &mut PublicIndex,
        id: &str,
        address: &str,
        scope: &AttributeSet,
        rng: &mut dyn SecureRng,
    ) -> Result<NodeDescriptor, NodeError> {
        self.action(ScalingAction::AddAuthorizationNode, index, |a, ix| {
            a.provision_authorization_inner(ix, id, address, scope, rng)
        })
    }

    pub(super) fn provision_authorization_inner(
        &mut self,
        index: &mut PublicIndex,
        id: &str,
        address: &str,
        scope: &AttributeSet,
        rng: &mut dyn SecureRng,
    ) -> Result<NodeDescriptor, NodeError> {
        if index.node(id).is_some() {
            return Err(NodeError::Invalid(format!("node {id:?} already registered")));
        }
        if scope.is_empty() {
            return Err(NodeError::Invalid("authorization scope is empty".into()));
        }
        for a in scope.iter() {
            match self.pk.current(a) {
                Some(aid) if aid.role == AttributeRole::Generic => {}
                _ => return Err(NodeError::Abe(crate::abe::AbeError::UnknownAttribute(a.to_owned()))),
            }
        }
        let an = format!("{AUTHORIZATION_ATTRIBUTE_PREFIX}{id}");
        self.abe
            .add_attribute(&mut self.pk, &self.mk, AttributeId::new(an.clone(), AttributeRole::Authorization))?;
        let abe_key = self.abe.generate_key_for_names(&self.pk, &self.mk, [an.as_str()], rng)?;
        let signing = SigKeyPair::generate(self.suite.sig, rng)?;
        self.deliver_key();
        self.ledger.keying_ops(1);
        self.publish(index)?;
        index.register(NodeEntry {
            id: id.to_owned(),
            role: NodeRole::Authorization,
            address: address.to_owned(),
            m_public: signing.public().to_vec(),
            responsibility: scope.clone(),
            blacklisted: false,
        })?;
        Ok(NodeDescriptor {
            id: id.to_owned(),
            role: NodeRole::Authorization,
            address: address.to_owned(),
            abe_key,
            signing: Some(signing),
            responsibility: scope.clone(),
        })
    }

    fn service_key(&self, rng: &mut dyn SecureRng) -> Result<AbePrivateKey, NodeError> {
        let mut names = vec![SERVICE_NODE_ATTRIBUTE.to_owned()];
        names.extend(self.params.validity_names());
        Ok(self
            .abe
            .generate_key_for_names(&self.pk, &self.mk, names.iter().map(String::as_str), rng)?)
    }

    pub fn provision_service_node(
        &mut self,
        index: &mut PublicIndex,
        id: &str,
        address: &str,
        rng: &mut dyn SecureRng,
    ) -> Result<NodeDescriptor, NodeError> {
        self.action(ScalingAction::AddServiceNode, index, |a, ix| {
            a.provision_service_inner(ix, id, address, rng)
        })
    }

    pub(super) fn provision_service_inner(
        &mut self,
        index: &mut PublicIndex,
        id: &str,
        address: &str,
        rng: &mut dyn SecureRng,
    ) -> Result<NodeDescriptor, NodeError> {
        if index.node(id).is_some() {
            return Err(NodeError::Invalid(format!("node {id:?} already registered")));
        }
        let abe_key = self.service_key(rng)?;
        self.deliver_key();
        self.ledger.messages(1);
        index.register(NodeEntry {
            id: id.to_owned(),
            role: NodeRole::Service,
            address: address.to_owned(),
            m_public: Vec::new(),
            responsibility: AttributeSet::new(),
            blacklisted: false,
        })?;
        Ok(NodeDescriptor {
            id: id.to_owned(),
            role: NodeRole::Service,
            address: address.to_owned(),
            abe_key,
            signing: None,
            responsibility: AttributeSet::new(),
        })
    }

    /// Removes a node from the whitelist; its keys are not revoked.
    pub fn remove_node(&mut self, index: &mut PublicIndex, id: &str) -> Result<(), NodeError> {
        let role = index.node(id).ok_or_else(|| NodeError::UnknownNode(id.to_owned()))?.role;
        let action = match role {
            NodeRole::Authorization => ScalingAction::RemoveAuthorizationNode,
            NodeRole::Service => ScalingAction::RemoveServiceNode,
            NodeRole::Authority => return Err(NodeError::Invalid("use remove_authority".into())),
        };
        self.action(action, index, |a, ix| {
            a.ledger.messages(a.cohort + 1);
            ix.blacklist(id)
        })
    }

    pub fn enroll_consumer(
        &mut self,
        index: &mut PublicIndex,
        id: &str,
        attributes: &AttributeSet,
        validity: &AttributeSet,
        rng: &mut dyn SecureRng,
    ) -> Result<ConsumerCredentials, NodeError> {
        self.action(ScalingAction::AddConsumer, index, |a, _| {
            a.enroll_inner(id, attributes, validity, rng)
        })
    }

    fn enroll_inner(
        &mut self,
        id: &str,
        attributes: &AttributeSet,
        validity: &AttributeSet,
        rng: &mut dyn SecureRng,
    ) -> Result<ConsumerCredentials, NodeError> {
        if self.consumers.contains_key(id) {
            return Err(NodeError::Invalid(format!("consumer {id:?} already enrolled")));
        }
        self.check_roles(attributes, AttributeRole::Generic)?;
        self.check_roles(validity, AttributeRole::Validity)?;
        let key = self.consumer_key(attributes, validity, rng)?;
        self.deliver_key();
        let signing = SigKeyPair::generate(self.suite.sig, rng)?;
        self.consumers.insert(
            id.to_owned(),
            ConsumerRecord {
                attributes: attributes.clone(),
                validity: validity.clone(),
                removed: false,
            },
        );
        Ok(ConsumerCredentials {
            id: id.to_owned(),
            key,
            signing,
            validity: validity.clone(),
        })
    }

    fn check_roles(&self, names: &AttributeSet, role: AttributeRole) -> Result<(), NodeError> {
        for n in names.iter() {
            match self.pk.current(n) {
                Some(aid) if aid.role == role => {}
                Some(_) => return Err(NodeError::Invalid(format!("{n:?} is not a {role:?} attribute"))),
                None => return Err(NodeError::Abe(crate::abe::AbeError::UnknownAttribute(n.to_owned()))),
            }
        }
        Ok(())
    }

    fn consumer_key(
        &self,
        attributes: &AttributeSet,
        validity: &AttributeSet,
        rng: &mut dyn SecureRng,
    ) -> Result<AbePrivateKey, NodeError> {
        let all = attributes.union(validity);
        Ok(self.abe.generate_key_for_names(&self.pk, &self.mk, all.iter(), rng)?)
    }

    /// Re-issues a consumer key at current epochs, e.g. for a consumer
    /// that missed a re-key delivery.
    pub fn reissue_consumer(&mut self, id: &str, rng: &mut dyn SecureRng) -> Result<AbePrivateKey, NodeError> {
        let rec = self
            .consumers
            .get(id)
            .filter(|c| !c.removed)
            .ok_or_else(|| NodeError::UnknownConsumer(id.to_owned()))?
            .clone();
        self.consumer_key(&rec.attributes, &rec.validity, rng)
    }

    /// Bumps the epochs of `names` and re-keys everyone who held them:
    /// consumers in the partition and every live service node. Only the
    /// epoch change is propagated to authorization nodes.
    pub(super) fn revoke_inner(
        &mut self,
        index: &mut PublicIndex,
        names: &[String],
        skip_service: Option<&str>,
        rng: &mut dyn SecureRng,
    ) -> Result<Rekey, NodeError> {
        for n in names {
            if self.pk.current(n).is_none() {
                return Err(NodeError::Abe(crate::abe::AbeError::UnknownAttribute(n.clone())));
            }
        }
        for n in names {
            self.abe.reissue_attribute(&mut self.pk, &self.mk, n)?;
            self.ledger.keying_ops(self.cohort);
        }
        let hit: BTreeSet<&str> = names.iter().map(String::as_str).collect();
        let affected: Vec<String> = self
            .consumers
            .iter()
            .filter(|(_, c)| !c.removed && c.attributes.union(&c.validity).iter().any(|a| hit.contains(a)))
            .map(|(id, _)| id.clone())
            .collect();
        let mut rekey = Rekey {
            revoked: names.to_vec(),
            ..Rekey::default()
        };
        self.ledger.partition(affected.len() as u64);
        for id in affected {
            let rec = self.consumers[&id].clone();
            rekey
                .consumers
                .insert(id, self.consumer_key(&rec.attributes, &rec.validity, rng)?);
            self.deliver_key();
        }
        let touches_service = names
            .iter()
            .any(|n| n == SERVICE_NODE_ATTRIBUTE || self.params.validity_names().contains(n));
        if touches_service {
            let ids: Vec<String> = index
                .live(NodeRole::Service)
                .map(|n| n.id.clone())
                .filter(|id| Some(id.as_str()) != skip_service)
                .collect();
            for id in ids {
                rekey.service_nodes.insert(id, self.service_key(rng)?);
                self.deliver_key();
            }
        }
        self.ledger.messages(index.live(NodeRole::Authorization).count() as u64);
        self.publish(index)?;
        Ok(rekey)
    }

    pub fn revoke_validity_attribute(
        &mut self,
        index: &mut PublicIndex,
        name: &str,
        rng: &mut dyn SecureRng,
    ) -> Result<Rekey, NodeError> {
        match self.pk.current(name) {
            Some(aid) if aid.role == AttributeRole::Validity => {}
            Some(_) => return Err(NodeError::Invalid(format!("{name:?} is not a validity attribute"))),
            None => return Err(NodeError::Abe(crate::abe::AbeError::UnknownAttribute(name.to_owned()))),
        }
        self.action(ScalingAction::RevokeValidity, index, |a, ix| {
            a.revoke_inner(ix, &[name.to_owned()], None, rng)
        })
    }

    /// Removes a consumer by revoking just enough of its validity
    /// attributes that it can no longer advertise u current ones.
    pub fn remove_consumer(
        &mut self,
        index: &mut PublicIndex,
        id: &str,
        rng: &mut dyn SecureRng,
    ) -> Result<Rekey, NodeError> {
        let rec = self
            .consumers
            .get(id)
            .filter(|c| !c.removed)
            .ok_or_else(|| NodeError::UnknownConsumer(id.to_owned()))?
            .clone();
        let held = rec.validity.len();
        let need = self.params.u as usize;
        let count = (held + 1).saturating_sub(need);
        let names: Vec<String> = rec.validity.iter().take(count).map(str::to_owned).collect();
        self.action(ScalingAction::RemoveConsumer, index, |a, ix| {
            a.consumers.get_mut(id).expect("checked above").removed = true;
            if names.is_empty() {
                return Ok(Rekey::default());
            }
            a.revoke_inner(ix, &names, None, rng)
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_version(AUTHORITY_VERSION);
        w.str(self.suite.id.as_str())
            .u32(self.params.x)
            .u32(self.params.u)
            .u64(self.params.ttl_max)
            .bytes(&self.pk.to_bytes())
            .bytes(&self.mk.to_bytes())
            .u64(self.cohort)
            .u32(self.consumers.len() as u32);
        for (id, c) in &self.consumers {
            w.str(id)
                .strings(c.attributes.iter())
                .strings(c.validity.iter())
                .u8(c.removed as u8);
        }
        w.finish()
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::versioned(buf, AUTHORITY_VERSION)?;
        let suite: CryptoSuite = r.str()?.parse().map_err(|e: crate::suite::SuiteError| WireError::Invalid(e.to_string()))?;
        let params = ProtocolParams {
            x: r.u32()?,
            u: r.u32()?,
            ttl_max: r.u64()?,
        };
        let pk = AbePublicParams::from_bytes(r.bytes()?)?;
        let mk = AbeMasterKey::from_bytes(r.bytes()?)?;
        let cohort = r.u64()?;
        let n = r.u32()?;
        let mut consumers = BTreeMap::new();
        for _ in 0..n {
            let id = r.str()?.to_owned();
            let rec = ConsumerRecord {
                attributes: r.strings()?.into_iter().collect(),
                validity: r.strings()?.into_iter().collect(),
                removed: r.u8()? != 0,
            };
            consumers.insert(id, rec);
        }
        r.finish()?;
        Ok(Self {
            abe: Abe::for_scheme(pk.scheme()),
            suite,
            pk,
            mk,
            params,
            cohort,
            consumers,
            ledger: ScalingLedger::new(),
        })
    }
}

fn is_validity_name(name: &str) -> bool {
    name.strip_prefix('v')
        .is_some_and(|rest| !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()))
}
