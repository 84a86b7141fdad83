/** Wire-format types mirroring the feedback service's JSON bodies. */

export interface EntityPose {
  entity: string;
  x: number;
  y: number;
  heading: number;
}

/** One rendered time step: every entity's pose. */
export type Frame = EntityPose[];

export type TicketStatus = "pending" | "labeled" | "expired";

export interface QueryTicket {
  query_id: string;
  env_id: string;
  created_at: number;
  status: TicketStatus;
  sigma0_frames: Frame[];
  sigma1_frames: Frame[];
}

export interface HighwayRenderMeta {
  kind: "highway";
  track_length: number;
  lane_centers: number[];
  lane_width: number;
  car_length: number;
  car_width: number;
}

export interface MoverRenderMeta {
  kind: "mover";
  arena_halfwidth: number;
  mover_radius: number;
}

export type RenderMeta = HighwayRenderMeta | MoverRenderMeta;

export interface EnvMeta {
  env_id: string;
  observation_dim: number;
  max_episode_steps: number;
  render: RenderMeta;
}

export type SubmitResult = "ok" | "not_found" | "conflict" | "invalid";
